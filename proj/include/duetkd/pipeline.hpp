#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "duetkd/backend.hpp"
#include "duetkd/config.hpp"
#include "duetkd/data.hpp"
#include "duetkd/events.hpp"
#include "duetkd/metrics.hpp"
#include "duetkd/student.hpp"
#include "duetkd/teacher.hpp"

namespace duetkd {

using WarnFn = std::function<void(const std::string&)>;

// The two LLM endpoints a run talks to. Owned here so tests can hand in
// scripted instances and inspect their consumption afterwards.
struct RunBackends {
    std::unique_ptr<ChatBackend> teacher;
    std::unique_ptr<ChatBackend> rationale;
};

RunBackends make_run_backends(const RunConfig& cfg);

struct RunResult {
    StudentModel student;
    std::vector<RunEvent> events;
    int batches_done = 0;
    int total_batches = 0;
    bool completed = false;                // false when max_batches stopped early
    std::optional<MetricsReport> holdout;  // train_ratio < 1 and completed
};

// One full distillation run into a fresh run directory: snapshot the
// config, build the initial template, then per batch — retrieve, attach
// rationales, run the gated teacher, train the student on the Confident
// predictions, pick the borderline case and refine the template. Every
// artifact (events.jsonl, student.ckpt, template.json,
// rationale_cache.jsonl, calls.jsonl) is persisted as the run goes, so a
// backend outage leaves a resumable directory behind.
RunResult run_distillation(const RunConfig& cfg, const Dataset& train,
                           const Dataset& unlabeled, const std::string& run_dir,
                           RunBackends& backends, const WarnFn& warn = nullptr);

// Load the datasets named by the config, build its backends, run.
RunResult start_run(const RunConfig& cfg, const std::string& run_dir,
                    const WarnFn& warn = nullptr);

// Pick an interrupted run directory back up and drive it to completion
// (or another max_batches batches when nonzero). Replaying against the
// same scripts reproduces an uninterrupted run bit for bit; a completed
// run returns immediately with no new events.
RunResult resume_run(const std::string& run_dir, const WarnFn& warn = nullptr,
                     int max_batches = 0);

// Borderline feedback: the case joins the template as an exemplar with
// the given label and rationale; at capacity the oldest exemplar is
// evicted. A duplicate source id or a 0-shot template is a no-op.
TeachingTemplate refine_template(TeachingTemplate tmpl, const Sample& borderline,
                                 const TeacherPrediction& label, const std::string& rationale,
                                 std::uint64_t seed);

// Sweep an event log for violations of the run's structural guarantees:
// exactly one TeacherCall and at most one Reprompt per sample, a Reprompt
// only after its TeacherCall, one BorderlineSelected per trained batch,
// at most one TemplateUpdated per batch, template size within n_shot, and
// no unconfident sample in any training batch. Returns descriptions of
// every violation found (empty = clean).
std::vector<std::string> check_run_invariants(const std::vector<RunEvent>& events,
                                              const RunConfig& cfg);

}  // namespace duetkd
