#include "duetkd/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "duetkd/http_backend.hpp"
#include "duetkd/kernels.hpp"

namespace duetkd {

namespace {

void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw ConfigError("unknown config key \"" + key + "\" in " + where);
}

FeatureSpec parse_feature_spec(const nlohmann::json& j, const FeatureSpec& defaults,
                               const std::string& where) {
    reject_unknown_keys(j, {"kind", "dim", "seed", "endpoint"}, where);
    FeatureSpec spec = defaults;
    spec.kind = j.value("kind", spec.kind);
    spec.dim = j.value("dim", spec.dim);
    spec.seed = j.value("seed", spec.seed);
    spec.endpoint = j.value("endpoint", spec.endpoint);
    if (spec.dim == 0) throw ConfigError(where + ".dim must be >= 1");
    return spec;
}

nlohmann::ordered_json feature_spec_json(const FeatureSpec& spec) {
    return {{"kind", spec.kind},
            {"dim", spec.dim},
            {"seed", spec.seed},
            {"endpoint", spec.endpoint}};
}

BackendConfig parse_backend_config(const nlohmann::json& j, const std::string& where) {
    reject_unknown_keys(
        j, {"type", "script", "endpoint", "model", "api_key_env", "reply", "timeout_seconds"},
        where);
    BackendConfig cfg;
    cfg.type = j.value("type", cfg.type);
    cfg.script_path = j.value("script", cfg.script_path);
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model = j.value("model", cfg.model);
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    cfg.reply = j.value("reply", cfg.reply);
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
    if (cfg.type != "scripted" && cfg.type != "http" && cfg.type != "canned")
        throw ConfigError(where + ".type must be scripted, http or canned, got \"" + cfg.type +
                          "\"");
    if (cfg.timeout_seconds < 1) throw ConfigError(where + ".timeout_seconds must be >= 1");
    return cfg;
}

nlohmann::ordered_json backend_config_json(const BackendConfig& cfg) {
    return {{"type", cfg.type},           {"script", cfg.script_path},
            {"endpoint", cfg.endpoint},   {"model", cfg.model},
            {"api_key_env", cfg.api_key_env}, {"reply", cfg.reply},
            {"timeout_seconds", cfg.timeout_seconds}};
}

const std::set<std::string> kTopLevelKeys = {
    "task",           "seed",
    "n_shot",         "teacher_threshold",
    "distill_batch_size", "finetune_batch_size",
    "lr",             "epochs_per_batch",
    "train_ratio",    "temperature",
    "max_tokens",     "path_confidence",
    "score_aggregation", "borderline_use_gold",
    "detail_template_path", "instruction_override_path",
    "kernels",        "max_batches",
    "embedding",      "features",
    "teacher_backend", "rationale_backend",
    "train_path",     "unlabeled_path",
};

}  // namespace

int RunConfig::resolved_finetune_batch() const {
    if (finetune_batch_size > 0) return finetune_batch_size;
    return task && task->id == TaskId::BinaryGreen ? 64 : 8;
}

RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown_keys(doc, kTopLevelKeys, "config");
    if (!doc.contains("task")) throw ConfigError("config is missing \"task\"");

    RunConfig cfg;
    try {
        cfg.task = &task_by_name(doc["task"].get<std::string>());
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.n_shot = doc.value("n_shot", cfg.n_shot);
        cfg.teacher_threshold = doc.value("teacher_threshold", cfg.teacher_threshold);
        cfg.distill_batch_size = doc.value("distill_batch_size", cfg.distill_batch_size);
        cfg.finetune_batch_size = doc.value("finetune_batch_size", cfg.finetune_batch_size);
        cfg.lr = doc.value("lr", cfg.lr);
        cfg.epochs_per_batch = doc.value("epochs_per_batch", cfg.epochs_per_batch);
        cfg.train_ratio = doc.value("train_ratio", cfg.train_ratio);
        cfg.temperature = doc.value("temperature", cfg.temperature);
        cfg.max_tokens = doc.value("max_tokens", cfg.max_tokens);
        cfg.path_confidence = doc.value("path_confidence", cfg.path_confidence);
        cfg.borderline_use_gold = doc.value("borderline_use_gold", cfg.borderline_use_gold);
        cfg.detail_template_path = doc.value("detail_template_path", cfg.detail_template_path);
        cfg.instruction_override_path =
            doc.value("instruction_override_path", cfg.instruction_override_path);
        cfg.kernels = doc.value("kernels", cfg.kernels);
        cfg.max_batches = doc.value("max_batches", cfg.max_batches);
        cfg.train_path = doc.value("train_path", cfg.train_path);
        cfg.unlabeled_path = doc.value("unlabeled_path", cfg.unlabeled_path);

        std::string agg = doc.value("score_aggregation", std::string("mean"));
        if (agg == "mean")
            cfg.score_aggregation = ScoreAggregation::Mean;
        else if (agg == "min")
            cfg.score_aggregation = ScoreAggregation::Min;
        else
            throw ConfigError("score_aggregation must be mean or min, got \"" + agg + "\"");

        // The student defaults to token-window features on the token task.
        if (cfg.task->token_level()) cfg.features.kind = "token_window";
        if (doc.contains("embedding"))
            cfg.embedding = parse_feature_spec(doc["embedding"], cfg.embedding, "embedding");
        if (doc.contains("features"))
            cfg.features = parse_feature_spec(doc["features"], cfg.features, "features");
        if (doc.contains("teacher_backend"))
            cfg.teacher_backend = parse_backend_config(doc["teacher_backend"], "teacher_backend");
        if (doc.contains("rationale_backend"))
            cfg.rationale_backend =
                parse_backend_config(doc["rationale_backend"], "rationale_backend");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config has a mistyped value: ") + e.what());
    }

    if (cfg.teacher_threshold < 0.0 || cfg.teacher_threshold > 1.0)
        throw ConfigError("teacher_threshold must lie in [0,1]");
    if (cfg.n_shot < 0) throw ConfigError("n_shot must be >= 0");
    if (cfg.distill_batch_size < 1) throw ConfigError("distill_batch_size must be >= 1");
    if (cfg.finetune_batch_size < 0) throw ConfigError("finetune_batch_size must be >= 0");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be positive");
    if (cfg.epochs_per_batch < 1) throw ConfigError("epochs_per_batch must be >= 1");
    if (!(cfg.train_ratio > 0.0) || cfg.train_ratio > 1.0)
        throw ConfigError("train_ratio must lie in (0,1]");
    if (cfg.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (cfg.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (cfg.max_batches < 0) throw ConfigError("max_batches must be >= 0");
    if (cfg.kernels != "auto" && cfg.kernels != "scalar" && cfg.kernels != "avx2")
        throw ConfigError("kernels must be auto, scalar or avx2, got \"" + cfg.kernels + "\"");

    if (cfg.embedding.kind != "hashed" && cfg.embedding.kind != "numeric" &&
        cfg.embedding.kind != "http")
        throw ConfigError("embedding.kind must be hashed, numeric or http, got \"" +
                          cfg.embedding.kind + "\"");
    if (cfg.task->token_level()) {
        if (cfg.features.kind != "token_window")
            throw ConfigError("task " + task_name(cfg.task->id) +
                              " needs features.kind token_window");
    } else if (cfg.features.kind == "token_window") {
        throw ConfigError("features.kind token_window only fits the token task");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
    for (const std::string& kv : overrides) apply_override(doc, kv);
    return parse_run_config(doc);
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
    if (!cfg.task) throw ValueError("config_to_json: no task set");
    nlohmann::ordered_json j;
    j["task"] = task_name(cfg.task->id);
    j["seed"] = cfg.seed;
    j["n_shot"] = cfg.n_shot;
    j["teacher_threshold"] = cfg.teacher_threshold;
    j["distill_batch_size"] = cfg.distill_batch_size;
    j["finetune_batch_size"] = cfg.finetune_batch_size;
    j["lr"] = cfg.lr;
    j["epochs_per_batch"] = cfg.epochs_per_batch;
    j["train_ratio"] = cfg.train_ratio;
    j["temperature"] = cfg.temperature;
    j["max_tokens"] = cfg.max_tokens;
    j["path_confidence"] = cfg.path_confidence;
    j["score_aggregation"] =
        cfg.score_aggregation == ScoreAggregation::Mean ? "mean" : "min";
    j["borderline_use_gold"] = cfg.borderline_use_gold;
    j["detail_template_path"] = cfg.detail_template_path;
    j["instruction_override_path"] = cfg.instruction_override_path;
    j["kernels"] = cfg.kernels;
    j["max_batches"] = cfg.max_batches;
    j["embedding"] = feature_spec_json(cfg.embedding);
    j["features"] = feature_spec_json(cfg.features);
    j["teacher_backend"] = backend_config_json(cfg.teacher_backend);
    j["rationale_backend"] = backend_config_json(cfg.rationale_backend);
    j["train_path"] = cfg.train_path;
    j["unlabeled_path"] = cfg.unlabeled_path;
    return j;
}

void apply_override(nlohmann::json& doc, const std::string& keyval) {
    std::size_t eq = keyval.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key=value, got \"" + keyval + "\"");
    std::string key = keyval.substr(0, eq);
    std::string raw = keyval.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // unquoted strings stay strings

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = key.find('.', start);
        std::string part = key.substr(start, dot - start);
        if (part.empty())
            throw ConfigError("override key has an empty segment: \"" + key + "\"");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
        node = &(*node)[part];
        if (!node->is_object())
            throw ConfigError("override path \"" + key + "\" crosses a non-object value");
        start = dot + 1;
    }
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg) {
    if (cfg.type == "scripted") {
        if (cfg.script_path.empty())
            throw ConfigError("scripted backend needs a \"script\" path");
        return ScriptedBackend::from_file(cfg.script_path);
    }
    if (cfg.type == "canned") {
        if (cfg.reply.empty()) throw ConfigError("canned backend needs a \"reply\" text");
        return std::make_unique<CannedBackend>(cfg.reply);
    }
    if (cfg.endpoint.empty()) throw ConfigError("http backend needs an \"endpoint\"");
    std::string key;
    if (!cfg.api_key_env.empty())
        if (const char* v = std::getenv(cfg.api_key_env.c_str())) key = v;
    return std::make_unique<HttpChatBackend>(cfg.endpoint, cfg.model, key,
                                             cfg.timeout_seconds);
}

std::shared_ptr<const EmbeddingProvider> make_embedding_provider(const FeatureSpec& spec) {
    if (spec.kind == "hashed") return std::make_shared<HashedProvider>(spec.dim, spec.seed);
    if (spec.kind == "numeric") return std::make_shared<NumericProvider>(spec.dim);
    if (spec.kind == "http")
        return std::make_shared<HttpEmbeddingProvider>(spec.endpoint, spec.dim);
    throw ConfigError("no embedding provider for kind \"" + spec.kind + "\"");
}

void apply_kernel_choice(const std::string& choice) {
    if (choice == "scalar")
        kernels::set_backend(kernels::Backend::Scalar);
    else if (choice == "avx2")
        kernels::set_backend(kernels::Backend::Avx2);
    else if (choice != "auto")
        throw ConfigError("kernels must be auto, scalar or avx2, got \"" + choice + "\"");
}

}  // namespace duetkd
