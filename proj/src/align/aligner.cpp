#include "duetkd/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "duetkd/spans.hpp"

namespace duetkd {

EmbeddingStore build_store(const Dataset& train, const EmbeddingProvider& provider) {
    if (train.empty()) throw ValueError("build_store: training dataset is empty");
    EmbeddingStore store;
    store.dim_ = provider.dim();
    store.entries_.reserve(train.size());
    for (const Sample& s : train.samples) {
        if (!s.labeled())
            throw ValueError("build_store: sample \"" + s.id + "\" has no label");
        EmbeddingVector v;
        try {
            v = provider.embed(s.context);
        } catch (const Error& e) {
            throw ValueError("build_store: embedding failed for sample \"" + s.id +
                             "\": " + e.what());
        }
        if (!v.usable())
            throw ValueError("build_store: zero-norm embedding for sample \"" + s.id + "\"");
        store.entries_.push_back({s.id, std::move(v), s});
    }
    return store;
}

std::vector<RetrievedCase> top_k_similar(const EmbeddingStore& store,
                                         const EmbeddingVector& query, std::size_t k,
                                         const std::optional<std::string>& exclude_id) {
    if (!query.usable()) throw ValueError("top_k_similar: query vector is unusable");

    struct Scored {
        double sim;
        const EmbeddingStore::Entry* entry;
    };
    std::vector<Scored> scored;
    scored.reserve(store.size());
    for (const auto& e : store.entries()) {
        if (exclude_id && e.sample_id == *exclude_id) continue;
        scored.push_back({cosine_similarity(query, e.vec), &e});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.entry->sample_id < b.entry->sample_id;
    });
    if (k < scored.size()) scored.resize(k);

    std::vector<RetrievedCase> out;
    out.reserve(scored.size());
    for (const auto& s : scored) out.push_back({s.entry->sample, s.sim, std::nullopt});
    return out;
}

int shot_budget(int n_shot) {
    if (n_shot < 0) throw ValueError("shot_budget: n_shot must be >= 0");
    if (n_shot == 0) return 0;
    if (n_shot <= 3) return 1;
    return static_cast<int>(std::ceil((n_shot - 1) / 2.0));
}

RationaleCache::RationaleCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // nothing cached yet
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++lines_;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("id") || !j.contains("rationale")) continue;
        map_[j["id"].get<std::string>()] = j["rationale"].get<std::string>();
    }
}

std::optional<std::string> RationaleCache::lookup(const std::string& id) const {
    auto it = map_.find(id);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void RationaleCache::insert(const std::string& id, const std::string& rationale) {
    map_[id] = rationale;
    ++lines_;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to rationale cache: " + path_);
    nlohmann::ordered_json j;
    j["id"] = id;
    j["rationale"] = rationale;
    out << j.dump() << '\n';
}

void truncate_jsonl(const std::string& path, std::size_t keep_lines) {
    std::ifstream in(path);
    if (!in) {
        if (keep_lines == 0) return;  // nothing to keep, nothing to do
        throw IoError("cannot read " + path + " for truncation");
    }
    std::vector<std::string> kept;
    std::string line;
    while (kept.size() < keep_lines && std::getline(in, line)) kept.push_back(line);
    in.close();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot rewrite " + path);
    for (const std::string& l : kept) out << l << '\n';
}

ChatRequest make_rationale_request(const std::string& context, const std::string& label_text,
                                   const std::string& tag) {
    ChatRequest req;
    req.user_text = "Context: " + context + "\nLabel: " + label_text +
                    "\nIn one or two sentences, explain the reasoning that leads from this "
                    "context to this label.";
    req.tag = tag;
    return req;
}

void attach_rationales(std::vector<RetrievedCase>& cases, ChatBackend& backend,
                       RationaleCache& cache, const TaskKind& task, const CallSink& sink,
                       const std::function<void(const std::string&)>& warn,
                       std::int64_t backoff_ms) {
    for (RetrievedCase& rc : cases) {
        if (!rc.sample.labeled())
            throw ValueError("attach_rationales: sample \"" + rc.sample.id + "\" has no label");
        if (auto cached = cache.lookup(rc.sample.id)) {
            rc.rationale = *cached;
            continue;
        }
        auto req = make_rationale_request(rc.sample.context, render_label_text(rc.sample, task),
                                          "rationale:" + rc.sample.id);
        try {
            ChatReply reply = complete(backend, req, sink, backoff_ms);
            rc.rationale = reply.text;
            cache.insert(rc.sample.id, reply.text);
        } catch (const Error& e) {
            rc.rationale = "";
            if (warn)
                warn("rationale generation failed for sample \"" + rc.sample.id +
                     "\": " + e.what());
        }
    }
}

std::string render_label_text(const Sample& s, const TaskKind& task) {
    if (!s.gold) throw ValueError("render_label_text: sample \"" + s.id + "\" has no label");
    if (task.token_level()) {
        const auto& labels = std::get<std::vector<int>>(*s.gold);
        SpanPair sp = spans_from_token_labels(tokenize_text(s.context), labels);
        return "Technology: " + sp.technology + "; Environmental Effect: " + sp.effect;
    }
    return task.label_space.encode(std::get<int>(*s.gold));
}

}  // namespace duetkd
