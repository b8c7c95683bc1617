#include "duetkd/features.hpp"

#include "duetkd/http_backend.hpp"

namespace duetkd {

Featurizer::Featurizer(FeatureSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind == "hashed") {
        provider_ = std::make_shared<HashedProvider>(spec_.dim, spec_.seed);
    } else if (spec_.kind == "numeric") {
        provider_ = std::make_shared<NumericProvider>(spec_.dim);
    } else if (spec_.kind == "http") {
        provider_ = std::make_shared<HttpEmbeddingProvider>(spec_.endpoint, spec_.dim);
    } else if (spec_.kind == "token_window") {
        if (spec_.dim < 8) throw ConfigError("token_window slot dim must be >= 8");
    } else {
        throw ConfigError("unknown feature kind: " + spec_.kind);
    }
}

std::vector<double> Featurizer::sample_features(const std::string& context) const {
    if (token_level())
        throw ValueError("sample_features called on a token-level featurizer");
    EmbeddingVector v = provider_->embed(context);
    if (v.dim() != spec_.dim)
        throw DimensionError("feature provider returned dim " + std::to_string(v.dim()) +
                             ", expected " + std::to_string(spec_.dim));
    return std::move(v.values);
}

std::vector<double> Featurizer::token_features(const std::vector<std::string>& tokens,
                                               std::size_t k) const {
    if (!token_level())
        throw ValueError("token_features called on a sequence-level featurizer");
    if (k >= tokens.size()) throw ValueError("token index out of range");

    std::vector<double> out;
    out.reserve(5 * spec_.dim);
    for (int off = -2; off <= 2; ++off) {
        std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(k) + off;
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(tokens.size())) {
            out.insert(out.end(), spec_.dim, 0.0);
            continue;
        }
        EmbeddingVector slot =
            hashed_featurize(tokens[static_cast<std::size_t>(idx)], spec_.dim, spec_.seed);
        out.insert(out.end(), slot.values.begin(), slot.values.end());
    }
    return out;
}

}  // namespace duetkd
