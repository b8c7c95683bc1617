#include "duetkd/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "duetkd/aligner.hpp"
#include "duetkd/checkpoint.hpp"
#include "duetkd/spans.hpp"

namespace fs = std::filesystem;

namespace duetkd {

namespace {

std::string read_text_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + what + ": " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

// calls.jsonl sink: a debug log of every backend exchange. Not covered by
// replay guarantees (it carries wall-clock latency).
CallSink make_call_sink(const std::string& path) {
    return [path](const CallRecord& rec) {
        nlohmann::ordered_json j;
        j["backend"] = rec.reply.backend_name;
        j["tag"] = rec.request.tag;
        j["latency_ms"] = rec.latency_ms;
        j["request_chars"] = rec.request.user_text.size();
        j["reply_chars"] = rec.reply.text.size();
        if (rec.prompt_tokens) j["prompt_tokens"] = *rec.prompt_tokens;
        if (rec.completion_tokens) j["completion_tokens"] = *rec.completion_tokens;
        std::ofstream out(path, std::ios::app);
        if (out) out << j.dump() << '\n';
    };
}

int total_batch_count(std::size_t unlabeled, int batch_size) {
    return static_cast<int>((unlabeled + static_cast<std::size_t>(batch_size) - 1) /
                            static_cast<std::size_t>(batch_size));
}

// Fetch a rationale for (sample, label) through the cache.
std::string rationale_for(const Sample& s, const std::string& label_text,
                          ChatBackend& backend, RationaleCache& cache, const CallSink& sink,
                          const WarnFn& warn) {
    if (auto cached = cache.lookup(s.id)) return *cached;
    try {
        ChatReply reply =
            complete(backend, make_rationale_request(s.context, label_text, "rationale:" + s.id),
                     sink);
        cache.insert(s.id, reply.text);
        return reply.text;
    } catch (const Error& e) {
        if (warn)
            warn("rationale generation failed for sample \"" + s.id + "\": " + e.what());
        return "";
    }
}

struct BatchMember {
    Sample sample;
    ParsedTeacherOutput parsed;
};

// Everything the loop keeps between batches, bundled so the fresh-start
// and resume paths share one driver.
struct LoopState {
    StudentModel student;
    TeachingTemplate tmpl;
    EventLog events;
    RationaleCache cache;
    int first_batch = 0;
};

nlohmann::ordered_json teacher_call_payload(const TeacherVerdict& v, const TaskKind& task,
                                            double threshold) {
    nlohmann::ordered_json p;
    p["parsed"] = !v.parse_failure_first;
    if (v.first_parsed) {
        p["confidence"] = v.first_parsed->confidence;
        p["prediction"] = prediction_label_text(v.first_parsed->prediction, task);
        p["gate"] = check_confidence(v.first_parsed->confidence, threshold) ==
                            ConfidenceStatus::Confident
                        ? "confident"
                        : "unconfident";
    } else {
        p["gate"] = "unparseable";
    }
    return p;
}

nlohmann::ordered_json reprompt_payload(const TeacherVerdict& v, const TaskKind& task) {
    nlohmann::ordered_json p;
    p["reason"] = v.parse_failure_first ? "parse_failure" : "unconfident";
    p["parsed"] = !v.parse_failure_second;
    if (!v.parse_failure_second && v.parsed) {
        p["confidence"] = v.parsed->confidence;
        p["prediction"] = prediction_label_text(v.parsed->prediction, task);
    }
    p["final"] = v.status == ConfidenceStatus::Confident ? "confident" : "unconfident";
    return p;
}

RunResult run_loop(const RunConfig& cfg, const Dataset& train, const Dataset& unlabeled,
                   const std::optional<Dataset>& holdout, const std::string& run_dir,
                   RunBackends& backends, const WarnFn& warn, LoopState state) {
    const TaskKind& task = *cfg.task;
    apply_kernel_choice(cfg.kernels);

    const CallSink sink = make_call_sink(run_dir + "/calls.jsonl");
    const Featurizer features(cfg.features);

    // Retrieval side; skipped entirely at budget 0 (0-shot runs).
    const int budget = shot_budget(cfg.n_shot);
    std::shared_ptr<const EmbeddingProvider> embedder;
    std::optional<EmbeddingStore> store;
    if (budget > 0) {
        embedder = make_embedding_provider(cfg.embedding);
        store.emplace(build_store(train, *embedder));
    }

    PromptOptions popts;
    popts.seed = cfg.seed;
    popts.path_confidence = cfg.path_confidence;
    popts.temperature = cfg.temperature;
    popts.max_tokens = cfg.max_tokens;
    if (!cfg.detail_template_path.empty())
        popts.detail_template = read_text_file(cfg.detail_template_path, "detail template");

    const int total_batches =
        total_batch_count(unlabeled.size(), cfg.distill_batch_size);
    int end_batch = total_batches;
    if (cfg.max_batches > 0)
        end_batch = std::min(total_batches, state.first_batch + cfg.max_batches);

    auto save_progress = [&](int batches_done) {
        write_text_file(run_dir + "/template.json", template_to_json(state.tmpl));
        CheckpointMeta meta;
        meta.task_name = task_name(task.id);
        meta.features = cfg.features;
        meta.batches_done = batches_done;
        meta.teacher_pos = backends.teacher->consumed_entries().value_or(0);
        meta.rationale_pos = backends.rationale->consumed_entries().value_or(0);
        meta.cache_lines = state.cache.lines();
        meta.template_json =
            nlohmann::ordered_json::parse(template_to_json(state.tmpl)).dump();
        save_checkpoint(run_dir + "/student.ckpt", state.student, meta);
    };
    if (state.first_batch == 0) save_progress(0);

    int batch = state.first_batch;
    for (; batch < end_batch; ++batch) {
        const std::size_t begin = static_cast<std::size_t>(batch) *
                                  static_cast<std::size_t>(cfg.distill_batch_size);
        const std::size_t end =
            std::min(unlabeled.size(), begin + static_cast<std::size_t>(cfg.distill_batch_size));

        // Gated teacher pass, in sample order.
        std::vector<BatchMember> members;
        int alignment_failures = 0;
        TrainBatch fine_tune;
        std::vector<std::string> trained_ids;
        for (std::size_t i = begin; i < end; ++i) {
            const Sample& s = unlabeled.samples[i];
            std::vector<RetrievedCase> retrieved;
            if (budget > 0) {
                retrieved = top_k_similar(*store, embedder->embed(s.context),
                                          static_cast<std::size_t>(budget), s.id);
                attach_rationales(retrieved, *backends.rationale, state.cache, task, sink,
                                  warn);
            }
            TeacherVerdict v = teacher_infer(*backends.teacher, state.tmpl, retrieved, s,
                                             cfg.teacher_threshold, sink, popts);

            state.events.append(
                {EventKind::TeacherCall, batch, s.id, teacher_call_payload(v, task, cfg.teacher_threshold)});
            if (v.parse_failure_first)
                state.events.append({EventKind::ParseFailure, batch, s.id,
                                     {{"stage", "reply"}, {"call", 1}}});
            if (v.reprompted)
                state.events.append(
                    {EventKind::Reprompt, batch, s.id, reprompt_payload(v, task)});
            if (v.parse_failure_second)
                state.events.append({EventKind::ParseFailure, batch, s.id,
                                     {{"stage", "reply"}, {"call", 2}}});

            if (v.status != ConfidenceStatus::Confident || !v.parsed) continue;

            // Confident prediction: convert to training items.
            if (task.token_level()) {
                const SpanPair& sp = std::get<SpanPair>(v.parsed->prediction);
                TokenizedSample ts = tokenize(s);
                SpanAlignment alignment;
                try {
                    alignment = align_spans(ts, sp.technology, sp.effect);
                } catch (const Error& e) {
                    ++alignment_failures;
                    state.events.append({EventKind::ParseFailure, batch, s.id,
                                         {{"stage", "align"}, {"error", e.what()}}});
                    if (warn)
                        warn("span alignment failed for sample \"" + s.id +
                             "\": " + e.what());
                    continue;
                }
                for (std::size_t k = 0; k < ts.tokens.size(); ++k)
                    fine_tune.items.push_back({features.token_features(ts.tokens, k),
                                               alignment.aligned_labels[k], s.id});
            } else {
                fine_tune.items.push_back({features.sample_features(s.context),
                                           std::get<int>(v.parsed->prediction), s.id});
            }
            trained_ids.push_back(s.id);
            members.push_back({s, *v.parsed});
        }

        // Student fine-tuning on the batch's Confident predictions.
        FitReport fit;
        if (!fine_tune.empty())
            fit = state.student.fit_batch(fine_tune, cfg.lr, cfg.epochs_per_batch,
                                          static_cast<std::size_t>(cfg.resolved_finetune_batch()));
        if (fit.loss_increased && warn)
            warn("batch " + std::to_string(batch) + ": loss went up (" +
                 std::to_string(fit.loss_before) + " -> " + std::to_string(fit.loss_after) +
                 ")");
        nlohmann::ordered_json trained;
        trained["batch_samples"] = end - begin;
        trained["trained_ids"] = trained_ids;
        trained["items"] = fine_tune.size();
        trained["alignment_failures"] = alignment_failures;
        trained["loss_before"] = fit.loss_before;
        trained["loss_after"] = fit.loss_after;
        trained["loss_increased"] = fit.loss_increased;
        state.events.append({EventKind::BatchTrained, batch, "", std::move(trained)});

        // Borderline feedback: the score argmin over the trained members.
        if (!members.empty()) {
            std::vector<std::pair<std::string, double>> scores;
            scores.reserve(members.size());
            for (const BatchMember& m : members)
                scores.emplace_back(
                    m.sample.id,
                    score_sample(state.student, m.sample, features, cfg.score_aggregation)
                        .probability);
            const std::string borderline_id = check_borderline(scores);
            const auto it =
                std::find_if(members.begin(), members.end(), [&](const BatchMember& m) {
                    return m.sample.id == borderline_id;
                });
            const BatchMember& borderline = *it;
            const double borderline_score =
                std::find_if(scores.begin(), scores.end(),
                             [&](const auto& p) { return p.first == borderline_id; })
                    ->second;
            state.events.append({EventKind::BorderlineSelected, batch, borderline_id,
                                 {{"score", borderline_score}, {"candidates", scores.size()}}});

            // Refinement is a no-op for 0-shot runs, so skip the rationale
            // fetch as well rather than spend backend calls on it.
            if (cfg.n_shot > 0) {
                TeacherPrediction label = borderline.parsed.prediction;
                if (cfg.borderline_use_gold && borderline.sample.labeled())
                    label = gold_prediction(borderline.sample, task);
                const std::string rationale =
                    rationale_for(borderline.sample, prediction_label_text(label, task),
                                  *backends.rationale, state.cache, sink, warn);

                const bool would_change = !state.tmpl.contains_source(borderline_id);
                std::string evicted;
                if (would_change &&
                    static_cast<int>(state.tmpl.examples.size()) == state.tmpl.n_shot)
                    evicted = state.tmpl.examples.front().source_id;
                state.tmpl = refine_template(std::move(state.tmpl), borderline.sample, label,
                                             rationale, cfg.seed);
                if (would_change)
                    state.events.append(
                        {EventKind::TemplateUpdated, batch, borderline_id,
                         {{"size", state.tmpl.examples.size()}, {"evicted", evicted}}});
            }
        }

        save_progress(batch + 1);
    }

    RunResult result{std::move(state.student), state.events.events(), batch, total_batches,
                     batch == total_batches, std::nullopt};

    // Holdout metrics once the run has finished.
    if (result.completed && holdout) {
        result.holdout = evaluate_student(result.student, *holdout, features);
        write_text_file(run_dir + "/metrics.json", result.holdout->to_json() + "\n");
    }
    return result;
}

}  // namespace

RunBackends make_run_backends(const RunConfig& cfg) {
    return RunBackends{make_backend(cfg.teacher_backend), make_backend(cfg.rationale_backend)};
}

RunResult run_distillation(const RunConfig& cfg, const Dataset& train,
                           const Dataset& unlabeled, const std::string& run_dir,
                           RunBackends& backends, const WarnFn& warn) {
    if (!cfg.task) throw ValueError("run_distillation: config has no task");
    const TaskKind& task = *cfg.task;
    if (train.task != &task || unlabeled.task != &task)
        throw ValueError("run_distillation: dataset task does not match the config");
    if (unlabeled.empty()) throw ValueError("run_distillation: no unlabeled samples");
    for (const Sample& s : train.samples)
        if (!s.labeled())
            throw ValueError("run_distillation: train sample \"" + s.id + "\" has no label");

    fs::create_directories(run_dir);
    write_text_file(run_dir + "/config", config_to_json(cfg).dump(2) + "\n");
    // A fresh run owns its directory: clear any leftover logs.
    write_events(run_dir + "/events.jsonl", {});
    write_text_file(run_dir + "/calls.jsonl", "");
    write_text_file(run_dir + "/rationale_cache.jsonl", "");

    // The holdout split is carved off before anything sees the data; the
    // retrieval store and initial template only ever use the train part.
    Dataset effective_train = train;
    std::optional<Dataset> holdout;
    if (cfg.train_ratio < 1.0) {
        auto parts = split_train_eval(train, cfg.train_ratio, cfg.seed);
        effective_train = std::move(parts.first);
        holdout = std::move(parts.second);
    }

    LoopState state{
        StudentModel(task.label_space, Featurizer(cfg.features).dim()),
        TeachingTemplate{},
        EventLog(run_dir + "/events.jsonl"),
        RationaleCache(run_dir + "/rationale_cache.jsonl"),
        0,
    };
    std::string instruction;
    if (!cfg.instruction_override_path.empty())
        instruction = load_instruction_override(cfg.instruction_override_path, task);
    state.tmpl = make_initial_template(task, cfg.n_shot, effective_train, *backends.rationale,
                                       state.cache, cfg.seed,
                                       make_call_sink(run_dir + "/calls.jsonl"), warn,
                                       instruction);

    return run_loop(cfg, effective_train, unlabeled, holdout, run_dir, backends, warn,
                    std::move(state));
}

RunResult start_run(const RunConfig& cfg, const std::string& run_dir, const WarnFn& warn) {
    if (!cfg.task) throw ValueError("start_run: config has no task");
    if (cfg.train_path.empty() || cfg.unlabeled_path.empty())
        throw ConfigError("start_run: config lacks train_path/unlabeled_path");
    Dataset train = load_dataset(cfg.train_path, *cfg.task);
    Dataset unlabeled = load_dataset(cfg.unlabeled_path, *cfg.task);
    RunBackends backends = make_run_backends(cfg);
    return run_distillation(cfg, train, unlabeled, run_dir, backends, warn);
}

RunResult resume_run(const std::string& run_dir, const WarnFn& warn, int max_batches) {
    RunConfig cfg = load_run_config(run_dir + "/config");
    LoadedCheckpoint ckpt = load_checkpoint(run_dir + "/student.ckpt");
    if (ckpt.meta.task_name != task_name(cfg.task->id))
        throw IntegrityError("resume_run: checkpoint task " + ckpt.meta.task_name +
                             " does not match config task " + task_name(cfg.task->id));
    if (ckpt.meta.template_json.empty())
        throw IntegrityError("resume_run: checkpoint carries no template");
    cfg.max_batches = max_batches;

    Dataset train = load_dataset(cfg.train_path, *cfg.task);
    Dataset unlabeled = load_dataset(cfg.unlabeled_path, *cfg.task);
    Dataset effective_train = train;
    std::optional<Dataset> holdout;
    if (cfg.train_ratio < 1.0) {
        auto parts = split_train_eval(train, cfg.train_ratio, cfg.seed);
        effective_train = std::move(parts.first);
        holdout = std::move(parts.second);
    }

    const int total_batches =
        total_batch_count(unlabeled.size(), cfg.distill_batch_size);
    if (ckpt.meta.batches_done >= total_batches) {
        // Nothing left to do; report the finished state untouched.
        return RunResult{std::move(ckpt.model), read_events(run_dir + "/events.jsonl"),
                         ckpt.meta.batches_done, total_batches, true, std::nullopt};
    }

    // Roll every mutable artifact back to the checkpoint's commit point.
    TeachingTemplate tmpl = template_from_json(ckpt.meta.template_json);
    write_text_file(run_dir + "/template.json", template_to_json(tmpl));
    truncate_jsonl(run_dir + "/rationale_cache.jsonl", ckpt.meta.cache_lines);

    RunBackends backends = make_run_backends(cfg);
    backends.teacher->fast_forward(ckpt.meta.teacher_pos);
    backends.rationale->fast_forward(ckpt.meta.rationale_pos);

    LoopState state{
        std::move(ckpt.model),
        std::move(tmpl),
        EventLog(run_dir + "/events.jsonl"),
        RationaleCache(run_dir + "/rationale_cache.jsonl"),
        ckpt.meta.batches_done,
    };
    state.events.truncate_from_batch(ckpt.meta.batches_done);

    return run_loop(cfg, effective_train, unlabeled, holdout, run_dir, backends, warn,
                    std::move(state));
}

TeachingTemplate refine_template(TeachingTemplate tmpl, const Sample& borderline,
                                 const TeacherPrediction& label, const std::string& rationale,
                                 std::uint64_t seed) {
    if (!tmpl.task) throw ValueError("refine_template: template has no task");
    if (tmpl.n_shot == 0) return tmpl;
    if (tmpl.contains_source(borderline.id)) return tmpl;

    TeachingExample ex;
    ex.source_id = borderline.id;
    ex.context = borderline.context;
    ex.label = label;
    ex.label_text = prediction_label_text(label, *tmpl.task);
    ex.rationale = rationale;
    ex.display_confidence = display_confidence_for(seed, borderline.id);

    if (static_cast<int>(tmpl.examples.size()) == tmpl.n_shot)
        tmpl.examples.erase(tmpl.examples.begin());  // FIFO: oldest goes first
    tmpl.examples.push_back(std::move(ex));
    return tmpl;
}

std::vector<std::string> check_run_invariants(const std::vector<RunEvent>& events,
                                              const RunConfig& cfg) {
    std::vector<std::string> violations;
    auto violate = [&](std::string text) { violations.push_back(std::move(text)); };

    std::map<std::pair<int, std::string>, int> teacher_calls;
    std::map<std::pair<int, std::string>, int> reprompts;
    std::map<std::pair<int, std::string>, std::string> final_verdict;
    std::map<int, int> borderline_per_batch;
    std::map<int, int> template_updates_per_batch;
    std::map<int, std::size_t> trained_members_per_batch;

    for (const RunEvent& e : events) {
        const auto key = std::make_pair(e.batch_index, e.sample_id);
        switch (e.kind) {
            case EventKind::TeacherCall:
                if (++teacher_calls[key] > 1)
                    violate("sample " + e.sample_id + " has multiple TeacherCall events in batch " +
                            std::to_string(e.batch_index));
                final_verdict[key] = e.payload.value("gate", "");
                break;
            case EventKind::Reprompt:
                if (!teacher_calls.count(key))
                    violate("Reprompt without TeacherCall for sample " + e.sample_id +
                            " in batch " + std::to_string(e.batch_index));
                if (++reprompts[key] > 1)
                    violate("sample " + e.sample_id + " re-prompted more than once in batch " +
                            std::to_string(e.batch_index));
                final_verdict[key] = e.payload.value("final", "");
                break;
            case EventKind::BatchTrained: {
                const auto& ids = e.payload.at("trained_ids");
                trained_members_per_batch[e.batch_index] = ids.size();
                for (const auto& id : ids) {
                    const auto skey = std::make_pair(e.batch_index, id.get<std::string>());
                    auto it = final_verdict.find(skey);
                    if (it == final_verdict.end())
                        violate("trained sample " + id.get<std::string>() +
                                " has no teacher verdict in batch " +
                                std::to_string(e.batch_index));
                    else if (it->second != "confident")
                        violate("trained sample " + id.get<std::string>() +
                                " was not confident in batch " + std::to_string(e.batch_index));
                }
                break;
            }
            case EventKind::BorderlineSelected:
                ++borderline_per_batch[e.batch_index];
                break;
            case EventKind::TemplateUpdated:
                ++template_updates_per_batch[e.batch_index];
                if (e.payload.value("size", 0) > cfg.n_shot)
                    violate("template grew past n_shot (" +
                            std::to_string(e.payload.value("size", 0)) + " > " +
                            std::to_string(cfg.n_shot) + ") in batch " +
                            std::to_string(e.batch_index));
                break;
            case EventKind::ParseFailure:
                break;
        }
    }

    for (const auto& [batch, members] : trained_members_per_batch) {
        const int expected = members > 0 ? 1 : 0;
        const int got =
            borderline_per_batch.count(batch) ? borderline_per_batch.at(batch) : 0;
        if (got != expected)
            violate("batch " + std::to_string(batch) + " has " + std::to_string(got) +
                    " BorderlineSelected events, expected " + std::to_string(expected));
    }
    for (const auto& [batch, count] : template_updates_per_batch)
        if (count > 1)
            violate("batch " + std::to_string(batch) + " updated the template " +
                    std::to_string(count) + " times");
    for (const auto& [key, count] : reprompts) {
        (void)count;
        if (teacher_calls[key] != 1)
            violate("sample " + key.second + " re-prompted without exactly one TeacherCall");
    }
    return violations;
}

}  // namespace duetkd
