#pragma once

#include <optional>
#include <string>
#include <variant>

#include "duetkd/task.hpp"

namespace duetkd {

// Technology / environmental-effect phrase pair predicted for the
// causality task.
struct SpanPair {
    std::string technology;
    std::string effect;

    bool operator==(const SpanPair&) const = default;
};

// Prediction is a class id for the classification tasks and a phrase pair
// for the causality task.
using TeacherPrediction = std::variant<int, SpanPair>;

struct ParsedTeacherOutput {
    TeacherPrediction prediction;
    double confidence = 1.0;  // normalized to [0,1]
    std::string rationale;

    bool operator==(const ParsedTeacherOutput&) const = default;
};

struct ParseOptions {
    // When set, the 4-way path task also expects/emits a "Confidence"
    // field (the stock template asks only for Label and Rationale, so the
    // default parse falls back to confidence 1.0).
    bool path_confidence = false;
};

// Extract the first well-formed JSON object in `text` that matches the
// task's reply schema. Confidence arrives on the 0..100 scale and is
// normalized to [0,1]. Throws ParseFailure (carrying the offending text)
// when no object matches, the answer is outside the schema, or the
// confidence is outside [0,100].
ParsedTeacherOutput parse_teacher_reply(const std::string& text, const TaskKind& task,
                                        const ParseOptions& opts = {});

// Inverse of parse_teacher_reply: render the output in the task's JSON
// reply format (confidence back on the 100-point scale). Re-parsing the
// result yields an equal value.
std::string render_teacher_reply(const ParsedTeacherOutput& out, const TaskKind& task,
                                 const ParseOptions& opts = {});

}  // namespace duetkd
