#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "duetkd/task.hpp"

namespace duetkd {

// Gold label: a single class id for sequence tasks, or one class id per
// token for the causality task.
using GoldLabel = std::variant<int, std::vector<int>>;

struct Sample {
    std::string id;
    std::string context;
    std::optional<GoldLabel> gold;

    bool labeled() const { return gold.has_value(); }
};

struct TokenizedSample {
    std::string sample_id;
    std::vector<std::string> tokens;
    std::optional<std::vector<int>> token_labels;
};

struct Dataset {
    const TaskKind* task = nullptr;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// Deterministic word/punctuation segmentation. Maximal runs of word
// characters (ASCII alphanumerics and all non-ASCII bytes) form one token;
// every other non-whitespace ASCII character is a single-character token.
// Concatenating the tokens reproduces the context with whitespace removed.
std::vector<std::string> tokenize_text(const std::string& context);
TokenizedSample tokenize(const Sample& s);

// Load a JSONL dataset: one object per line with fields
//   id (string), context (string), label (int, int array, or absent).
// Rejects malformed lines (with line number), out-of-range labels and
// duplicate ids. For the causality task, a label array must have exactly
// one entry per token of the tokenized context.
Dataset load_dataset(const std::string& path, const TaskKind& task);

// Parse one already-read JSONL record (shared by load_dataset and the
// inline datasets in scenario files). line_no is for error messages.
Sample parse_sample_json(const std::string& line, const TaskKind& task, std::size_t line_no);

// Deterministic split: Fisher-Yates shuffle under SplitMix64(seed), first
// floor(ratio*n) samples to train, rest to eval. Requires 0 < ratio < 1
// and a non-empty dataset.
std::pair<Dataset, Dataset> split_train_eval(const Dataset& ds, double ratio,
                                             std::uint64_t seed);

}  // namespace duetkd
