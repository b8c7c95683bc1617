#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "duetkd/data.hpp"
#include "duetkd/features.hpp"
#include "duetkd/task.hpp"

namespace duetkd {

// One training item: a feature vector h and its target class. For the
// token task there is one item per token.
struct TrainItem {
    std::vector<double> features;
    int target = 0;
    std::string sample_id;
};

struct TrainBatch {
    std::vector<TrainItem> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

struct StudentOutput {
    std::variant<int, std::vector<int>> prediction;
    double probability = 0.0;          // softmax probability of the prediction;
                                       // mean over tokens for the token task
    std::vector<double> distribution;  // full simplex (sequence tasks only)
};

enum class ScoreAggregation { Mean, Min };

struct FitReport {
    double loss_before = 0.0;
    double loss_after = 0.0;
    bool loss_increased = false;  // warning condition, not an error
};

// Linear softmax classifier over feature vectors: one weight row and one
// bias per class. Parameters start at zero (the objective is convex, so
// zero init is a safe deterministic start).
class StudentModel {
public:
    StudentModel(LabelSpace space, std::size_t dim);

    std::size_t dim() const { return dim_; }
    int num_classes() const { return label_space_.size(); }
    const LabelSpace& label_space() const { return label_space_; }
    std::uint64_t step_count() const { return step_count_; }

    // p(c|h) = exp(w_c.h + b_c) / sum_m exp(w_m.h + b_m), computed with
    // max-subtraction. Every component is > 0 and the vector sums to 1.
    std::vector<double> predict_proba(std::span<const double> h) const;

    // -sum_d log p(c_d | h_d) over the batch (summed, not averaged).
    double batch_loss(const TrainBatch& batch) const;

    // One full-batch gradient step: d(loss)/d(logits) = p - onehot(c),
    // accumulated over the batch and applied with step size lr.
    void sgd_step(const TrainBatch& batch, double lr);

    // epochs passes of sgd_step over the batch, chunked into minibatches
    // of `minibatch` items (0 = whole batch; a trailing partial chunk is
    // trained as-is). Flags (not fails) when the batch loss went up.
    FitReport fit_batch(const TrainBatch& batch, double lr, int epochs,
                        std::size_t minibatch = 0);

    // Row-major [num_classes x dim] weights, then per-class bias.
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& bias() const { return bias_; }
    void set_step_count(std::uint64_t n) { step_count_ = n; }

private:
    LabelSpace label_space_;
    std::size_t dim_;
    std::vector<double> weights_;
    std::vector<double> bias_;
    std::uint64_t step_count_ = 0;
};

// Score one sample: sequence tasks classify the sample feature vector;
// the token task classifies every token, predicts the label sequence and
// aggregates per-token max probabilities (mean by default, min by config).
StudentOutput score_sample(const StudentModel& model, const Sample& s,
                           const Featurizer& features,
                           ScoreAggregation agg = ScoreAggregation::Mean);

// The borderline member of a batch: the id with the minimum score; exact
// ties resolve to the earliest batch position.
std::string check_borderline(const std::vector<std::pair<std::string, double>>& scores);

}  // namespace duetkd
