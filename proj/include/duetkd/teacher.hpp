#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "duetkd/aligner.hpp"
#include "duetkd/backend.hpp"
#include "duetkd/data.hpp"
#include "duetkd/reply.hpp"
#include "duetkd/task.hpp"

namespace duetkd {

enum class ConfidenceStatus { Confident, Unconfident };

// One few-shot exemplar: context, structured label, its rendered text,
// a rationale, and the percent confidence displayed in the prompt.
struct TeachingExample {
    std::string source_id;  // sample the exemplar was built from
    std::string context;
    TeacherPrediction label;
    std::string label_text;
    std::string rationale;
    int display_confidence = 75;  // percent; engine-synthesized values lie in [60,90]
};

// Instruction plus ordered exemplars for one task; capacity n_shot.
// Mutated only between batches (refine_template); immutable during one.
struct TeachingTemplate {
    const TaskKind* task = nullptr;
    std::string instruction;
    std::vector<TeachingExample> examples;
    int n_shot = 0;

    bool contains_source(const std::string& source_id) const;
};

// Outcome of one gated teacher query (at most one re-prompt).
struct TeacherVerdict {
    // Final accepted parse; absent only when both replies were unparseable.
    std::optional<ParsedTeacherOutput> parsed;
    ConfidenceStatus status = ConfidenceStatus::Unconfident;
    bool reprompted = false;
    int calls = 0;  // backend calls issued: 1 or 2

    // Per-call detail, for event logging.
    std::optional<ParsedTeacherOutput> first_parsed;  // call-1 parse, if any
    bool parse_failure_first = false;
    bool parse_failure_second = false;

    int parse_failures() const {
        return (parse_failure_first ? 1 : 0) + (parse_failure_second ? 1 : 0);
    }
};

// Extra detail appended when re-prompting an unconfident teacher.
struct RepromptDetail {
    std::string detail_text;  // never empty
};

// Knobs threaded through prompt construction. `seed` keys the stateless
// display-confidence draws; `detail_template` optionally replaces the
// built-in re-prompt detail text ({{context}} / {{similar}} placeholders).
struct PromptOptions {
    std::uint64_t seed = 0;
    bool path_confidence = false;
    std::string detail_template;
    double temperature = 1.0;
    int max_tokens = 512;
};

// Percent confidence shown for a synthesized exemplar: uniform over
// {60..90}, keyed by (seed, sample id) so resumed runs render identical
// prompts without replaying generator state.
int display_confidence_for(std::uint64_t seed, const std::string& sample_id);

// Structured gold label of a sample: the class id for sequence tasks, the
// technology/effect phrase pair (decoded from BIO labels) for the
// causality task. Rejects unlabeled samples and labels that do not fit
// the task.
TeacherPrediction gold_prediction(const Sample& s, const TaskKind& task);

// Display text of a prediction ("yes", a class name, or the rendered
// technology/effect pair).
std::string prediction_label_text(const TeacherPrediction& pred, const TaskKind& task);

// Exemplar from a labeled sample.
TeachingExample example_from_sample(const Sample& s, const TaskKind& task,
                                    std::string rationale, int display_confidence);

// Empty template with the task's stock instruction (or an override).
TeachingTemplate make_template(const TaskKind& task, int n_shot,
                               const std::string& instruction_override = "");

// Initial template: the first min(n_shot, |train|) training samples become
// exemplars, with rationales generated through `rationale` (cache
// consulted first; a failed call leaves an empty rationale and warns).
TeachingTemplate make_initial_template(const TaskKind& task, int n_shot, const Dataset& train,
                                       ChatBackend& rationale, RationaleCache& cache,
                                       std::uint64_t seed, const CallSink& sink = nullptr,
                                       const std::function<void(const std::string&)>& warn = nullptr,
                                       const std::string& instruction_override = "");

// Render the full prompt: instruction, the template's exemplars, the
// retrieved cases as additional exemplars, then the query context. Equal
// inputs produce byte-equal prompts. Requires |retrieved| within the
// template's shot budget and retrieved labels that fit the task.
ChatRequest build_prompt(const TeachingTemplate& tmpl,
                         const std::vector<RetrievedCase>& retrieved, const Sample& query,
                         const PromptOptions& opts = {});

// Confidence gate: Unconfident iff score < threshold (the confident band
// is the closed-below interval [threshold, 1]). Both arguments in [0,1].
ConfidenceStatus check_confidence(double score, double threshold);

// Compose the detail text for a re-prompt: the restated query context,
// the most similar retrieved case (when any) with its rationale, and a
// sentence asking the model to re-examine. Deterministic.
RepromptDetail compose_reprompt_detail(const Sample& query,
                                       const std::vector<RetrievedCase>& retrieved,
                                       const TaskKind& task, const PromptOptions& opts = {});

// Gated teacher query. One completion; when it parses Confident that is
// the verdict. Otherwise exactly one re-prompt (detail text for a low
// score, a format reminder for an unparseable reply) and the second reply
// is final regardless of score. Two unparseable replies yield an
// Unconfident verdict with no prediction. Never more than two calls.
TeacherVerdict teacher_infer(ChatBackend& backend, const TeachingTemplate& tmpl,
                             const std::vector<RetrievedCase>& retrieved, const Sample& query,
                             double threshold, const CallSink& sink = nullptr,
                             const PromptOptions& opts = {}, std::int64_t backoff_ms = 250);

// template.json (de)serialization. Round-trips exactly.
std::string template_to_json(const TeachingTemplate& tmpl);
TeachingTemplate template_from_json(const std::string& text);

// Read a plain-text instruction override, checking it still names every
// field of the task's reply format.
std::string load_instruction_override(const std::string& path, const TaskKind& task);

}  // namespace duetkd
