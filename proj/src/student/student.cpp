#include "duetkd/student.hpp"

#include <algorithm>
#include <cmath>

#include "duetkd/kernels.hpp"

namespace duetkd {

StudentModel::StudentModel(LabelSpace space, std::size_t dim)
    : label_space_(std::move(space)), dim_(dim) {
    if (label_space_.size() < 2) throw ValueError("StudentModel needs at least 2 classes");
    if (dim_ == 0) throw ValueError("StudentModel needs a positive feature dim");
    weights_.assign(static_cast<std::size_t>(label_space_.size()) * dim_, 0.0);
    bias_.assign(static_cast<std::size_t>(label_space_.size()), 0.0);
}

std::vector<double> StudentModel::predict_proba(std::span<const double> h) const {
    if (h.size() != dim_)
        throw DimensionError("predict_proba: feature dim " + std::to_string(h.size()) +
                             ", model dim " + std::to_string(dim_));
    for (double v : h)
        if (!std::isfinite(v)) throw ValueError("predict_proba: non-finite feature");

    const int m = num_classes();
    std::vector<double> logits(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) {
        logits[static_cast<std::size_t>(c)] =
            kernels::dot(&weights_[static_cast<std::size_t>(c) * dim_], h.data(), dim_) +
            bias_[static_cast<std::size_t>(c)];
    }
    double zmax = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) {
        l = std::exp(l - zmax);
        z += l;
    }
    for (double& l : logits) l /= z;
    return logits;
}

double StudentModel::batch_loss(const TrainBatch& batch) const {
    if (batch.empty()) throw ValueError("batch_loss: empty batch");
    double loss = 0.0;
    for (const TrainItem& it : batch.items) {
        if (!label_space_.contains(it.target))
            throw ValueError("batch_loss: target " + std::to_string(it.target) +
                             " outside label space");
        auto p = predict_proba(it.features);
        loss -= std::log(p[static_cast<std::size_t>(it.target)]);
    }
    return loss;
}

void StudentModel::sgd_step(const TrainBatch& batch, double lr) {
    if (batch.empty()) throw ValueError("sgd_step: empty batch");
    if (!(lr > 0.0)) throw ValueError("sgd_step: lr must be > 0");

    const int m = num_classes();
    std::vector<double> grad_w(weights_.size(), 0.0);
    std::vector<double> grad_b(bias_.size(), 0.0);

    for (const TrainItem& it : batch.items) {
        if (!label_space_.contains(it.target))
            throw ValueError("sgd_step: target " + std::to_string(it.target) +
                             " outside label space");
        auto p = predict_proba(it.features);
        for (int c = 0; c < m; ++c) {
            double g = p[static_cast<std::size_t>(c)] - (c == it.target ? 1.0 : 0.0);
            kernels::axpy(g, it.features.data(), &grad_w[static_cast<std::size_t>(c) * dim_],
                          dim_);
            grad_b[static_cast<std::size_t>(c)] += g;
        }
    }

    for (double g : grad_b)
        if (!std::isfinite(g)) throw ValueError("sgd_step: non-finite gradient");

    kernels::axpy(-lr, grad_w.data(), weights_.data(), weights_.size());
    kernels::axpy(-lr, grad_b.data(), bias_.data(), bias_.size());
    for (double w : weights_)
        if (!std::isfinite(w)) throw ValueError("sgd_step: parameters became non-finite");
    ++step_count_;
}

FitReport StudentModel::fit_batch(const TrainBatch& batch, double lr, int epochs,
                                  std::size_t minibatch) {
    if (epochs < 1) throw ValueError("fit_batch: epochs must be >= 1");
    if (batch.empty()) throw ValueError("fit_batch: empty batch");

    FitReport report;
    report.loss_before = batch_loss(batch);

    const std::size_t chunk = (minibatch == 0) ? batch.size() : minibatch;
    for (int e = 0; e < epochs; ++e) {
        for (std::size_t start = 0; start < batch.size(); start += chunk) {
            TrainBatch mb;
            std::size_t end = std::min(start + chunk, batch.size());
            mb.items.assign(batch.items.begin() + static_cast<std::ptrdiff_t>(start),
                            batch.items.begin() + static_cast<std::ptrdiff_t>(end));
            sgd_step(mb, lr);
        }
    }

    report.loss_after = batch_loss(batch);
    report.loss_increased = report.loss_after > report.loss_before;
    return report;
}

StudentOutput score_sample(const StudentModel& model, const Sample& s,
                           const Featurizer& features, ScoreAggregation agg) {
    StudentOutput out;
    if (!features.token_level()) {
        auto h = features.sample_features(s.context);
        auto p = model.predict_proba(h);
        auto arg = std::max_element(p.begin(), p.end()) - p.begin();  // lowest id on ties
        out.prediction = static_cast<int>(arg);
        out.probability = p[static_cast<std::size_t>(arg)];
        out.distribution = std::move(p);
        return out;
    }

    auto tokens = tokenize_text(s.context);
    std::vector<int> labels;
    labels.reserve(tokens.size());
    double acc = (agg == ScoreAggregation::Min) ? 1.0 : 0.0;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        auto p = model.predict_proba(features.token_features(tokens, k));
        auto arg = std::max_element(p.begin(), p.end()) - p.begin();
        labels.push_back(static_cast<int>(arg));
        double pmax = p[static_cast<std::size_t>(arg)];
        if (agg == ScoreAggregation::Min)
            acc = std::min(acc, pmax);
        else
            acc += pmax;
    }
    out.probability =
        (agg == ScoreAggregation::Min) ? acc : acc / static_cast<double>(tokens.size());
    out.prediction = std::move(labels);
    return out;
}

std::string check_borderline(const std::vector<std::pair<std::string, double>>& scores) {
    if (scores.empty()) throw ValueError("check_borderline: empty batch");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].second < scores[best].second) best = i;  // strict: earliest wins ties
    }
    return scores[best].first;
}

}  // namespace duetkd
