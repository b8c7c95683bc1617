#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "duetkd/errors.hpp"
#include "duetkd/metrics.hpp"
#include "duetkd/spans.hpp"

#include "common.hpp"

using namespace duetkd;

namespace {

const LabelSpace& binary_space() { return task_binary_green().label_space; }

// Hand-built confusion-matrix reference used to cross-check the engine.
MetricsReport oracle_prf(const std::vector<int>& gold, const std::vector<int>& pred,
                         int classes) {
    MetricsReport report;
    report.n_eval = gold.size();
    double macro_p = 0, macro_r = 0, macro_f = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (gold[i] == pred[i]) ++hits;
    for (int c = 0; c < classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0, support = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (gold[i] == c) ++support;
            if (pred[i] == c && gold[i] == c) ++tp;
            if (pred[i] == c && gold[i] != c) ++fp;
            if (pred[i] != c && gold[i] == c) ++fn;
        }
        double p = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        double r = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        double f = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
        report.per_class.push_back({c, p, r, f, support});
        macro_p += p;
        macro_r += r;
        macro_f += f;
    }
    report.macro_precision = macro_p / classes;
    report.macro_recall = macro_r / classes;
    report.macro_f1 = macro_f / classes;
    report.micro_f1 = static_cast<double>(hits) / static_cast<double>(gold.size());
    return report;
}

}  // namespace

TEST_CASE("perfect predictions score 1 everywhere") {
    std::vector<int> gold = {0, 1, 0, 1, 1};
    MetricsReport r = precision_recall_f1(gold, gold, binary_space());
    CHECK(r.macro_precision == doctest::Approx(1.0));
    CHECK(r.macro_recall == doctest::Approx(1.0));
    CHECK(r.macro_f1 == doctest::Approx(1.0));
    CHECK(r.micro_f1 == doctest::Approx(1.0));
    CHECK(r.n_eval == 5);
}

TEST_CASE("all-class-0 predictions on balanced binary gold give macro F1 = 1/3") {
    std::vector<int> gold = {0, 1, 0, 1, 0, 1, 0, 1};
    std::vector<int> pred(8, 0);
    MetricsReport r = precision_recall_f1(gold, pred, binary_space());

    REQUIRE(r.per_class.size() == 2);
    CHECK(r.per_class[0].precision == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.per_class[0].recall == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.per_class[1].precision == 0.0);
    CHECK(r.per_class[1].recall == 0.0);
    CHECK(r.per_class[1].f1 == 0.0);
    CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("disjoint predictions give macro F1 = 0") {
    std::vector<int> gold = {0, 0, 1, 1};
    std::vector<int> pred = {1, 1, 0, 0};
    MetricsReport r = precision_recall_f1(gold, pred, binary_space());
    CHECK(r.macro_f1 == 0.0);
    CHECK(r.micro_f1 == 0.0);
}

TEST_CASE("precision_recall_f1 validates lengths and label ranges") {
    CHECK_THROWS_AS(precision_recall_f1({0, 1}, {0}, binary_space()), DimensionError);
    CHECK_THROWS_AS(precision_recall_f1({}, {}, binary_space()), ValueError);
    CHECK_THROWS_AS(precision_recall_f1({0, 2}, {0, 1}, binary_space()), ValueError);
    CHECK_THROWS_AS(precision_recall_f1({0, 1}, {0, -1}, binary_space()), ValueError);
}

TEST_CASE("metrics match the confusion-matrix oracle on random instances") {
    std::mt19937_64 rng(100);
    const LabelSpace& space = task_path_class().label_space;
    std::uniform_int_distribution<int> cls(0, space.size() - 1);
    std::uniform_int_distribution<std::size_t> len(1, 200);

    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = len(rng);
        std::vector<int> gold(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = cls(rng);
            pred[i] = cls(rng);
        }
        MetricsReport got = precision_recall_f1(gold, pred, space);
        MetricsReport want = oracle_prf(gold, pred, space.size());

        REQUIRE(got.per_class.size() == want.per_class.size());
        for (std::size_t c = 0; c < got.per_class.size(); ++c) {
            CHECK(got.per_class[c].precision ==
                  doctest::Approx(want.per_class[c].precision).epsilon(1e-12));
            CHECK(got.per_class[c].recall ==
                  doctest::Approx(want.per_class[c].recall).epsilon(1e-12));
            CHECK(got.per_class[c].f1 == doctest::Approx(want.per_class[c].f1).epsilon(1e-12));
            CHECK(got.per_class[c].support == want.per_class[c].support);
        }
        CHECK(got.macro_f1 == doctest::Approx(want.macro_f1).epsilon(1e-12));
        CHECK(got.micro_f1 == doctest::Approx(want.micro_f1).epsilon(1e-12));
    }
}

TEST_CASE("metrics are invariant under identical permutation of gold and pred") {
    std::mt19937_64 rng(7);
    std::vector<int> gold = {0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
    std::vector<int> pred = {0, 0, 1, 1, 1, 0, 1, 0, 1, 1};
    MetricsReport base = precision_recall_f1(gold, pred, binary_space());

    std::vector<std::size_t> order(gold.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> g2, p2;
    for (std::size_t i : order) {
        g2.push_back(gold[i]);
        p2.push_back(pred[i]);
    }
    MetricsReport shuffled = precision_recall_f1(g2, p2, binary_space());
    CHECK(shuffled.macro_f1 == doctest::Approx(base.macro_f1).epsilon(1e-15));
    CHECK(shuffled.macro_precision == doctest::Approx(base.macro_precision).epsilon(1e-15));
    CHECK(shuffled.micro_f1 == doctest::Approx(base.micro_f1).epsilon(1e-15));
}

TEST_CASE("swapping gold and pred swaps precision and recall") {
    std::vector<int> gold = {0, 1, 1, 0, 1, 1, 0, 0, 1, 0};
    std::vector<int> pred = {0, 0, 1, 1, 1, 0, 1, 0, 1, 1};
    MetricsReport fwd = precision_recall_f1(gold, pred, binary_space());
    MetricsReport rev = precision_recall_f1(pred, gold, binary_space());
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(fwd.per_class[c].precision ==
              doctest::Approx(rev.per_class[c].recall).epsilon(1e-15));
        CHECK(fwd.per_class[c].recall ==
              doctest::Approx(rev.per_class[c].precision).epsilon(1e-15));
    }
}

TEST_CASE("report renders as text and JSON") {
    MetricsReport r = precision_recall_f1({0, 1, 1}, {0, 1, 0}, binary_space());
    std::string text = r.to_text();
    CHECK(text.find("macro") != std::string::npos);

    nlohmann::json j = nlohmann::json::parse(r.to_json());
    CHECK(j["n_eval"] == 3);
    CHECK(j["per_class"].size() == 2);
    CHECK(j["macro_f1"].get<double>() == doctest::Approx(r.macro_f1));
}

// ---------------------------------------------------------------------------
// Span alignment
// ---------------------------------------------------------------------------

TEST_CASE("align_spans emits BIO labels for both phrases") {
    Sample s;
    s.id = "x";
    s.context = "solar cells cut CO2 emissions";
    SpanAlignment a = align_spans(tokenize(s), "solar cells", "cut CO2 emissions");
    CHECK(a.aligned_labels == std::vector<int>{1, 2, 3, 4, 4});
    CHECK(a.technology_span.value() == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(a.effect_span.value() == std::pair<std::size_t, std::size_t>{2, 4});
}

TEST_CASE("align_spans normalizes whitespace before matching") {
    Sample s;
    s.id = "x";
    s.context = "solar  cells   cut CO2 emissions";
    SpanAlignment a = align_spans(tokenize(s), "solar cells", "cut  CO2 emissions");
    CHECK(a.aligned_labels == std::vector<int>{1, 2, 3, 4, 4});
}

TEST_CASE("align_spans failures carry the missing phrase") {
    Sample s;
    s.id = "x";
    s.context = "wind turbines reduce noise";
    try {
        align_spans(tokenize(s), "solar cells", "reduce noise");
        FAIL("expected AlignmentFailure");
    } catch (const AlignmentFailure& e) {
        CHECK(std::string(e.what()).find("solar cells") != std::string::npos);
    }
    CHECK_THROWS_AS(align_spans(tokenize(s), "wind turbines", "turbines reduce"),
                    OverlapFailure);
}

TEST_CASE("align then decode round-trips the phrases") {
    Sample s;
    s.id = "x";
    s.context = "advanced heat pumps lower household gas use substantially";
    auto ts = tokenize(s);
    SpanAlignment a = align_spans(ts, "heat pumps", "lower household gas use");
    SpanPair back = spans_from_token_labels(ts.tokens, a.aligned_labels);
    CHECK(back.technology == "heat pumps");
    CHECK(back.effect == "lower household gas use");
}

TEST_CASE("spans_from_token_labels handles absent spans") {
    SpanPair none = spans_from_token_labels({"a", "b"}, {0, 0});
    CHECK(none.technology.empty());
    CHECK(none.effect.empty());
}

// ---------------------------------------------------------------------------
// evaluate_student
// ---------------------------------------------------------------------------

namespace {

Dataset numeric_eval(const std::vector<std::pair<std::vector<double>, int>>& rows) {
    Dataset ds;
    ds.task = &task_binary_green();
    int i = 0;
    for (const auto& [vec, label] : rows) {
        Sample s;
        s.id = "e" + std::to_string(i++);
        for (double v : vec) s.context += testutil::exact(v) + " ";
        s.gold = label;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

TEST_CASE("a model that separates the eval set scores macro F1 = 1") {
    // 10 points, class by sign of the first coordinate; weights to match.
    std::vector<std::pair<std::vector<double>, int>> rows;
    for (int i = 0; i < 5; ++i) {
        rows.push_back({{+2.0 + i, 1.0}, 0});
        rows.push_back({{-2.0 - i, 1.0}, 1});
    }
    Dataset ds = numeric_eval(rows);

    StudentModel m(binary_space(), 2);
    m.weights() = {+5.0, 0.0, -5.0, 0.0};  // class0 likes positive x
    Featurizer features(FeatureSpec{"numeric", 2, 0, ""});
    MetricsReport r = evaluate_student(m, ds, features);
    CHECK(r.macro_f1 == doctest::Approx(1.0));
    CHECK(r.n_eval == 10);
}

TEST_CASE("an arbitrary model on balanced binary data lands near 0.5 macro F1") {
    // 1000 balanced samples with random features; a fixed random model's
    // predictions are independent of the labels, so per-class F1
    // concentrates around 0.5 (binomial bound).
    std::mt19937_64 rng(500);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<std::pair<std::vector<double>, int>> rows;
    for (int i = 0; i < 1000; ++i)
        rows.push_back({{dist(rng), dist(rng)}, i % 2});
    Dataset ds = numeric_eval(rows);

    StudentModel m(binary_space(), 2);
    m.weights() = {0.7, -0.2, -0.4, 0.9};
    Featurizer features(FeatureSpec{"numeric", 2, 0, ""});
    MetricsReport r = evaluate_student(m, ds, features);
    CHECK(r.macro_f1 > 0.40);
    CHECK(r.macro_f1 < 0.60);
}

TEST_CASE("evaluate_student rejects empty or unlabeled eval sets") {
    StudentModel m(binary_space(), 2);
    Featurizer features(FeatureSpec{"numeric", 2, 0, ""});
    Dataset empty;
    empty.task = &task_binary_green();
    CHECK_THROWS_AS(evaluate_student(m, empty, features), ValueError);

    Dataset ds = numeric_eval({{{1.0, 2.0}, 0}});
    ds.samples[0].gold.reset();
    CHECK_THROWS_AS(evaluate_student(m, ds, features), ValueError);
}

TEST_CASE("token-level evaluation concatenates per-token labels") {
    Dataset ds;
    ds.task = &task_causality_tokens();
    Sample s;
    s.id = "t";
    s.context = "solar cells cut CO2 emissions";
    s.gold = std::vector<int>{1, 2, 3, 4, 4};
    ds.samples.push_back(s);

    FeatureSpec spec{"token_window", 16, 0, ""};
    StudentModel m(task_causality_tokens().label_space, spec.feature_dim());
    Featurizer features(spec);
    MetricsReport r = evaluate_student(m, ds, features);
    CHECK(r.n_eval == 5);  // one row per token
}
