#include "duetkd/spans.hpp"

namespace duetkd {

namespace {

// First window of `haystack` equal to `needle`, or npos.
std::size_t find_subsequence(const std::vector<std::string>& haystack,
                             const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return std::string::npos;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (haystack[i + j] != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::string::npos;
}

}  // namespace

SpanAlignment align_spans(const TokenizedSample& ts, const std::string& technology,
                          const std::string& effect) {
    if (ts.tokens.empty()) throw ValueError("align_spans: sample has no tokens");

    auto tech_tokens = tokenize_text(technology);
    auto eff_tokens = tokenize_text(effect);
    if (tech_tokens.empty())
        throw AlignmentFailure("technology phrase is empty (sample " + ts.sample_id + ")");
    if (eff_tokens.empty())
        throw AlignmentFailure("effect phrase is empty (sample " + ts.sample_id + ")");

    std::size_t tpos = find_subsequence(ts.tokens, tech_tokens);
    if (tpos == std::string::npos)
        throw AlignmentFailure("technology phrase not found in context: \"" + technology + "\"");
    std::size_t epos = find_subsequence(ts.tokens, eff_tokens);
    if (epos == std::string::npos)
        throw AlignmentFailure("effect phrase not found in context: \"" + effect + "\"");

    std::size_t tend = tpos + tech_tokens.size() - 1;
    std::size_t eend = epos + eff_tokens.size() - 1;
    if (tpos <= eend && epos <= tend)
        throw OverlapFailure("technology and effect spans overlap at tokens " +
                             std::to_string(std::max(tpos, epos)) + ".." +
                             std::to_string(std::min(tend, eend)));

    SpanAlignment out;
    out.technology_span = {tpos, tend};
    out.effect_span = {epos, eend};
    out.aligned_labels.assign(ts.tokens.size(), kTokenOutside);
    out.aligned_labels[tpos] = kTokenBeginTech;
    for (std::size_t i = tpos + 1; i <= tend; ++i) out.aligned_labels[i] = kTokenInsideTech;
    out.aligned_labels[epos] = kTokenBeginEffect;
    for (std::size_t i = epos + 1; i <= eend; ++i) out.aligned_labels[i] = kTokenInsideEffect;
    return out;
}

SpanPair spans_from_token_labels(const std::vector<std::string>& tokens,
                                 const std::vector<int>& labels) {
    if (tokens.size() != labels.size())
        throw DimensionError("spans_from_token_labels: " + std::to_string(tokens.size()) +
                             " tokens vs " + std::to_string(labels.size()) + " labels");
    auto collect = [&](int begin_label, int inside_label) {
        std::string phrase;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != begin_label && labels[i] != inside_label) continue;
            // first span only: stop once a collected span ends
            std::size_t j = i;
            phrase = tokens[j];
            for (++j; j < labels.size() && labels[j] == inside_label; ++j) {
                phrase += ' ';
                phrase += tokens[j];
            }
            break;
        }
        return phrase;
    };
    return SpanPair{collect(kTokenBeginTech, kTokenInsideTech),
                    collect(kTokenBeginEffect, kTokenInsideEffect)};
}

}  // namespace duetkd
