#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "duetkd/errors.hpp"

namespace duetkd {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;
    bool all_finite() const;
    // True when the vector can take part in similarity (nonzero norm).
    bool usable() const;
};

// Cosine similarity (a.b)/(|a||b|). Throws DimensionError on mismatched
// dims and ValueError on a zero-norm input.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Context embedding source. Implementations must be deterministic:
// the same text maps to the same vector.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
    virtual std::string name() const = 0;
};

// Character-trigram feature hashing with signed buckets, L2-normalized.
// The text is framed with STX/ETX sentinels so one-character inputs still
// produce a trigram; the empty string hashes to the (unusable) zero vector.
// Requires dim >= 8.
EmbeddingVector hashed_featurize(const std::string& text, std::size_t dim,
                                 std::uint64_t seed);

class HashedProvider final : public EmbeddingProvider {
public:
    HashedProvider(std::size_t dim, std::uint64_t seed);
    std::size_t dim() const override { return dim_; }
    EmbeddingVector embed(const std::string& text) const override;
    std::string name() const override { return "hashed"; }
    std::uint64_t seed() const { return seed_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Reads whitespace-separated numbers straight out of the context. Lets
// numeric datasets (synthetic benchmarks) flow through the same pipeline
// as text.
class NumericProvider final : public EmbeddingProvider {
public:
    explicit NumericProvider(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    EmbeddingVector embed(const std::string& text) const override;
    std::string name() const override { return "numeric"; }

private:
    std::size_t dim_;
};

}  // namespace duetkd
