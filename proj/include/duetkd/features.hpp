#pragma once

#include <memory>
#include <string>
#include <vector>

#include "duetkd/embedding.hpp"

namespace duetkd {

// Serializable description of how student feature vectors h are computed.
// kind:
//   "hashed"       trigram-hashed context features (dim, seed)
//   "numeric"      numbers parsed straight from the context (dim)
//   "http"         external embedding service (dim, endpoint)
//   "token_window" per-token features: the token plus a +-2 window, each
//                  slot trigram-hashed to `dim` and concatenated, so the
//                  model input dim is 5*dim
struct FeatureSpec {
    std::string kind = "hashed";
    std::size_t dim = 256;
    std::uint64_t seed = 0;
    std::string endpoint;

    std::size_t feature_dim() const { return kind == "token_window" ? 5 * dim : dim; }
    bool token_level() const { return kind == "token_window"; }
};

// Computes model inputs from samples or tokens per a FeatureSpec.
class Featurizer {
public:
    explicit Featurizer(FeatureSpec spec);

    const FeatureSpec& spec() const { return spec_; }
    std::size_t dim() const { return spec_.feature_dim(); }
    bool token_level() const { return spec_.token_level(); }

    // Sequence-task features for a whole context.
    std::vector<double> sample_features(const std::string& context) const;

    // Token-task features for tokens[k].
    std::vector<double> token_features(const std::vector<std::string>& tokens,
                                       std::size_t k) const;

private:
    FeatureSpec spec_;
    std::shared_ptr<const EmbeddingProvider> provider_;  // sequence kinds only
};

}  // namespace duetkd
