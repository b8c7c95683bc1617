#pragma once

#include <string>
#include <vector>

#include "duetkd/errors.hpp"

namespace duetkd {

enum class TaskId {
    BinaryGreen,      // binary sequence classification, labels {0,1}
    CausalityTokens,  // token-level BIO over technology/effect spans, labels {0..4}
    PathClass,        // 4-way sequence classification, labels {0..3}
};

// Ordered, contiguous class ids with display names.
struct LabelSpace {
    std::vector<std::string> names;  // names[c] is the display name of class c

    int size() const { return static_cast<int>(names.size()); }
    bool contains(int c) const { return c >= 0 && c < size(); }

    const std::string& encode(int c) const {
        if (!contains(c)) throw ValueError("label out of range: " + std::to_string(c));
        return names[static_cast<std::size_t>(c)];
    }
    // Inverse of encode; throws ValueError for unknown names.
    int decode(const std::string& name) const;
};

// A task binding: which task, its prompt instruction, and its label space.
struct TaskKind {
    TaskId id;
    std::string instruction;
    LabelSpace label_space;

    bool token_level() const { return id == TaskId::CausalityTokens; }
};

// Canonical task definitions (instructions are the full teaching-template
// texts; label spaces are fixed per task).
const TaskKind& task_binary_green();
const TaskKind& task_causality_tokens();
const TaskKind& task_path_class();

const TaskKind& task_by_name(const std::string& name);  // "binary_green" | "causality_tokens" | "path_class"
std::string task_name(TaskId id);

// BIO token classes for the causality task.
inline constexpr int kTokenOutside = 0;
inline constexpr int kTokenBeginTech = 1;
inline constexpr int kTokenInsideTech = 2;
inline constexpr int kTokenBeginEffect = 3;
inline constexpr int kTokenInsideEffect = 4;

}  // namespace duetkd
