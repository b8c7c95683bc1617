#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duetkd/data.hpp"
#include "duetkd/reply.hpp"

namespace duetkd {

// Token-index spans (inclusive bounds) for the causality task, plus the
// per-token BIO labels they induce.
struct SpanAlignment {
    std::optional<std::pair<std::size_t, std::size_t>> technology_span;
    std::optional<std::pair<std::size_t, std::size_t>> effect_span;
    std::vector<int> aligned_labels;
};

// Locate the technology and effect phrases as contiguous token
// subsequences of the context (first occurrence, whitespace-normalized via
// the canonical tokenizer) and emit BIO labels. Throws AlignmentFailure
// naming the missing phrase, or OverlapFailure when the spans collide.
SpanAlignment align_spans(const TokenizedSample& ts, const std::string& technology,
                          const std::string& effect);

// Inverse direction: decode BIO token labels back into the technology and
// effect phrases (tokens joined by single spaces; empty when the span is
// absent).
SpanPair spans_from_token_labels(const std::vector<std::string>& tokens,
                                 const std::vector<int>& labels);

}  // namespace duetkd
