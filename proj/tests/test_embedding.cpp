#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "duetkd/embedding.hpp"
#include "duetkd/errors.hpp"

#include "common.hpp"

using namespace duetkd;

namespace {

EmbeddingVector vec(std::initializer_list<double> vals) {
    return EmbeddingVector{std::vector<double>(vals)};
}

}  // namespace

TEST_CASE("cosine_similarity matches closed-form values") {
    CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0).epsilon(1e-12));
    // dot = 2+2+4 = 8; |a| = |b| = 3.
    CHECK(cosine_similarity(vec({1, 2, 2}), vec({2, 1, 2})) ==
          doctest::Approx(8.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("cosine_similarity rejects bad inputs") {
    CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), DimensionError);
    CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), ValueError);
}

TEST_CASE("cosine_similarity agrees with a brute-force oracle on 1000 instances") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::uniform_int_distribution<std::size_t> dims(1, 64);

    for (int i = 0; i < 1000; ++i) {
        std::size_t d = dims(rng);
        EmbeddingVector a, b;
        a.values.resize(d);
        b.values.resize(d);
        double na = 0.0, nb = 0.0;
        do {
            for (auto& x : a.values) x = dist(rng);
            for (auto& x : b.values) x = dist(rng);
            na = a.norm();
            nb = b.norm();
        } while (na == 0.0 || nb == 0.0);

        double expected = testutil::naive_cosine(a.values, b.values);
        CHECK(cosine_similarity(a, b) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("cosine is scale-invariant and symmetric") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        EmbeddingVector a, b;
        a.values.resize(16);
        b.values.resize(16);
        for (auto& x : a.values) x = dist(rng) + 0.01;
        for (auto& x : b.values) x = dist(rng) + 0.01;

        double base = cosine_similarity(a, b);
        CHECK(cosine_similarity(b, a) == doctest::Approx(base).epsilon(1e-12));

        EmbeddingVector a3 = a;
        for (auto& x : a3.values) x *= 3.0;
        CHECK(cosine_similarity(a3, b) == doctest::Approx(base).epsilon(1e-9));
        CHECK(base >= -1.0 - 1e-12);
        CHECK(base <= 1.0 + 1e-12);
    }
}

TEST_CASE("hashed_featurize is deterministic and unit-norm") {
    auto v1 = hashed_featurize("solar cells reduce emissions", 256, 42);
    auto v2 = hashed_featurize("solar cells reduce emissions", 256, 42);
    CHECK(v1.values == v2.values);
    CHECK(v1.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v1.usable());

    // A different seed hashes trigram buckets differently.
    auto v3 = hashed_featurize("solar cells reduce emissions", 256, 43);
    CHECK(v1.values != v3.values);
}

TEST_CASE("hashed_featurize maps the empty string to an unusable zero vector") {
    auto v = hashed_featurize("", 64, 0);
    CHECK(v.dim() == 64);
    CHECK_FALSE(v.usable());
    for (double x : v.values) CHECK(x == 0.0);
}

TEST_CASE("hashed_featurize handles one-character inputs via sentinels") {
    auto v = hashed_featurize("x", 64, 0);
    CHECK(v.usable());
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hashed_featurize requires dim >= 8") {
    CHECK_THROWS_AS(hashed_featurize("abc", 4, 0), ValueError);
    CHECK_THROWS_AS(HashedProvider(2, 0), ValueError);
}

TEST_CASE("1000 distinct lines: self-similarity 1, distinct pairs rarely collide") {
    // Synthesize a corpus of distinct lines from a fixed vocabulary.
    const std::vector<std::string> vocab = {
        "solar",  "wind",    "carbon", "cell",   "storage", "emission", "grid",
        "biomass", "turbine", "panel",  "hybrid", "capture", "thermal",  "efficiency"};
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);

    std::vector<std::string> lines;
    std::vector<EmbeddingVector> vecs;
    HashedProvider provider(256, 0);
    while (lines.size() < 1000) {
        std::string line = vocab[pick(rng)];
        for (int w = 0; w < 5; ++w) line += " " + vocab[pick(rng)];
        line += " #" + std::to_string(lines.size());  // guarantee distinctness
        lines.push_back(line);
        vecs.push_back(provider.embed(line));
    }

    std::size_t below = 0, total = 0;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        CHECK(cosine_similarity(vecs[i], vecs[i]) == doctest::Approx(1.0).epsilon(1e-9));
        for (std::size_t j = i + 1; j < vecs.size(); ++j) {
            ++total;
            if (cosine_similarity(vecs[i], vecs[j]) < 0.99) ++below;
        }
    }
    // At least 99% of non-identical pairs stay below 0.99 similarity.
    CHECK(static_cast<double>(below) >= 0.99 * static_cast<double>(total));
}

TEST_CASE("NumericProvider parses whitespace-separated numbers") {
    NumericProvider p(3);
    auto v = p.embed(" 1.5 2 -3 ");
    CHECK(v.values == std::vector<double>{1.5, 2.0, -3.0});

    CHECK_THROWS_AS(p.embed("1 2"), ValueError);      // too few
    CHECK_THROWS_AS(p.embed("1 2 3 4"), ValueError);  // too many
    CHECK_THROWS_AS(p.embed("1 2 xyz"), ValueError);  // trailing junk stops the parse short
}

TEST_CASE("NumericProvider embeds deterministically") {
    NumericProvider p(4);
    CHECK(p.embed("0.25 -1 3.5 2").values == p.embed("0.25 -1 3.5 2").values);
}
