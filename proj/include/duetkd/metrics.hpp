#pragma once

#include <string>
#include <vector>

#include "duetkd/spans.hpp"
#include "duetkd/student.hpp"
#include "duetkd/task.hpp"

namespace duetkd {

struct ClassMetrics {
    int class_id = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  // gold count
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;  // == accuracy for single-label classification
    std::size_t n_eval = 0;

    std::string to_text() const;
    std::string to_json() const;
};

// Per-class one-vs-rest precision/recall/F1 with unweighted macro
// averaging. A class with zero predicted positives gets P = 0; F1 is 0
// when P and R are both 0.
MetricsReport precision_recall_f1(const std::vector<int>& gold, const std::vector<int>& pred,
                                  const LabelSpace& space);

// Score every sample of a fully gold-labeled eval set (per token for the
// causality task) and aggregate with precision_recall_f1.
MetricsReport evaluate_student(const StudentModel& model, const Dataset& eval_ds,
                               const Featurizer& features);

}  // namespace duetkd
