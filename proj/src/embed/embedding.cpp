#include "duetkd/embedding.hpp"

#include <cmath>
#include <sstream>

#include "duetkd/kernels.hpp"
#include "duetkd/rng.hpp"

namespace duetkd {

double EmbeddingVector::norm() const {
    return std::sqrt(kernels::squared_norm(values.data(), values.size()));
}

bool EmbeddingVector::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

bool EmbeddingVector::usable() const {
    if (values.empty() || !all_finite()) return false;
    return kernels::squared_norm(values.data(), values.size()) > 0.0;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw DimensionError("cosine_similarity: dim " + std::to_string(a.dim()) +
                             " vs " + std::to_string(b.dim()));
    const double na = kernels::squared_norm(a.values.data(), a.dim());
    const double nb = kernels::squared_norm(b.values.data(), b.dim());
    if (na <= 0.0 || nb <= 0.0)
        throw ValueError("cosine_similarity: zero-norm input");
    const double d = kernels::dot(a.values.data(), b.values.data(), a.dim());
    return d / (std::sqrt(na) * std::sqrt(nb));
}

EmbeddingVector hashed_featurize(const std::string& text, std::size_t dim,
                                 std::uint64_t seed) {
    if (dim < 8) throw ValueError("hashed_featurize: dim must be >= 8");
    EmbeddingVector out;
    out.values.assign(dim, 0.0);

    // Frame with sentinels, then hash every 3-byte window.
    std::string framed;
    framed.reserve(text.size() + 2);
    framed.push_back('\x02');
    framed += text;
    framed.push_back('\x03');
    if (framed.size() < 3) return out;  // empty input: zero vector

    for (std::size_t i = 0; i + 3 <= framed.size(); ++i) {
        std::uint64_t h = fnv1a64(framed.data() + i, 3, mix64(seed));
        h = mix64(h);
        std::size_t bucket = static_cast<std::size_t>((h >> 1) % dim);
        double sign = (h & 1) ? 1.0 : -1.0;
        out.values[bucket] += sign;
    }

    double n2 = kernels::squared_norm(out.values.data(), dim);
    if (n2 > 0.0) kernels::scale(out.values.data(), 1.0 / std::sqrt(n2), dim);
    return out;
}

HashedProvider::HashedProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
    if (dim < 8) throw ValueError("HashedProvider: dim must be >= 8");
}

EmbeddingVector HashedProvider::embed(const std::string& text) const {
    return hashed_featurize(text, dim_, seed_);
}

EmbeddingVector NumericProvider::embed(const std::string& text) const {
    EmbeddingVector out;
    out.values.reserve(dim_);
    std::istringstream in(text);
    double v;
    while (in >> v) out.values.push_back(v);
    if (out.dim() != dim_)
        throw ValueError("numeric context has " + std::to_string(out.dim()) +
                         " values, expected " + std::to_string(dim_));
    if (!out.all_finite()) throw ValueError("numeric context has non-finite values");
    return out;
}

}  // namespace duetkd
