#include "duetkd/metrics.hpp"

#include <sstream>

#include <json.hpp>

namespace duetkd {

MetricsReport precision_recall_f1(const std::vector<int>& gold, const std::vector<int>& pred,
                                  const LabelSpace& space) {
    if (gold.size() != pred.size())
        throw DimensionError("precision_recall_f1: " + std::to_string(gold.size()) +
                             " gold vs " + std::to_string(pred.size()) + " predictions");
    if (gold.empty()) throw ValueError("precision_recall_f1: empty input");

    const int m = space.size();
    std::vector<std::size_t> tp(m, 0), fp(m, 0), fn(m, 0), support(m, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!space.contains(gold[i]))
            throw ValueError("gold label " + std::to_string(gold[i]) + " outside label space");
        if (!space.contains(pred[i]))
            throw ValueError("predicted label " + std::to_string(pred[i]) +
                             " outside label space");
        ++support[static_cast<std::size_t>(gold[i])];
        if (gold[i] == pred[i]) {
            ++tp[static_cast<std::size_t>(gold[i])];
            ++correct;
        } else {
            ++fn[static_cast<std::size_t>(gold[i])];
            ++fp[static_cast<std::size_t>(pred[i])];
        }
    }

    MetricsReport rep;
    rep.n_eval = gold.size();
    for (int c = 0; c < m; ++c) {
        auto ci = static_cast<std::size_t>(c);
        ClassMetrics cm;
        cm.class_id = c;
        cm.support = support[ci];
        std::size_t predicted = tp[ci] + fp[ci];
        cm.precision = predicted == 0 ? 0.0
                                      : static_cast<double>(tp[ci]) /
                                            static_cast<double>(predicted);
        std::size_t actual = tp[ci] + fn[ci];
        cm.recall =
            actual == 0 ? 0.0 : static_cast<double>(tp[ci]) / static_cast<double>(actual);
        cm.f1 = (cm.precision + cm.recall) == 0.0
                    ? 0.0
                    : 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
        rep.per_class.push_back(cm);
        rep.macro_precision += cm.precision;
        rep.macro_recall += cm.recall;
        rep.macro_f1 += cm.f1;
    }
    rep.macro_precision /= m;
    rep.macro_recall /= m;
    rep.macro_f1 /= m;
    rep.micro_f1 = static_cast<double>(correct) / static_cast<double>(gold.size());
    return rep;
}

MetricsReport evaluate_student(const StudentModel& model, const Dataset& eval_ds,
                               const Featurizer& features) {
    if (eval_ds.empty()) throw ValueError("evaluate_student: empty eval set");
    std::vector<int> gold, pred;
    for (const Sample& s : eval_ds.samples) {
        if (!s.labeled())
            throw ValueError("evaluate_student: sample \"" + s.id + "\" has no gold label");
        StudentOutput out = score_sample(model, s, features);
        if (features.token_level()) {
            const auto& gold_seq = std::get<std::vector<int>>(*s.gold);
            const auto& pred_seq = std::get<std::vector<int>>(out.prediction);
            if (gold_seq.size() != pred_seq.size())
                throw DimensionError("evaluate_student: token label length mismatch for \"" +
                                     s.id + "\"");
            gold.insert(gold.end(), gold_seq.begin(), gold_seq.end());
            pred.insert(pred.end(), pred_seq.begin(), pred_seq.end());
        } else {
            gold.push_back(std::get<int>(*s.gold));
            pred.push_back(std::get<int>(out.prediction));
        }
    }
    return precision_recall_f1(gold, pred, model.label_space());
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << "class  precision  recall     f1         support\n";
    char buf[128];
    for (const auto& cm : per_class) {
        std::snprintf(buf, sizeof(buf), "%-5d  %-9.4f  %-9.4f  %-9.4f  %zu\n", cm.class_id,
                      cm.precision, cm.recall, cm.f1, cm.support);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "macro  %-9.4f  %-9.4f  %-9.4f  n=%zu\n", macro_precision,
                  macro_recall, macro_f1, n_eval);
    os << buf;
    std::snprintf(buf, sizeof(buf), "micro F1 %.4f\n", micro_f1);
    os << buf;
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["per_class"] = nlohmann::ordered_json::array();
    for (const auto& cm : per_class) {
        j["per_class"].push_back({{"class", cm.class_id},
                                  {"precision", cm.precision},
                                  {"recall", cm.recall},
                                  {"f1", cm.f1},
                                  {"support", cm.support}});
    }
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    j["micro_f1"] = micro_f1;
    j["n_eval"] = n_eval;
    return j.dump(2);
}

}  // namespace duetkd
