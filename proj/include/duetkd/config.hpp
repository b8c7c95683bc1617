#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "duetkd/backend.hpp"
#include "duetkd/embedding.hpp"
#include "duetkd/features.hpp"
#include "duetkd/student.hpp"
#include "duetkd/task.hpp"

namespace duetkd {

// One LLM endpoint. "scripted" replays a JSONL reply script, "http"
// speaks the chat-completions protocol, "canned" answers every request
// with the same text. Secrets never live in the file: the http type
// names an environment variable that holds the bearer token.
struct BackendConfig {
    std::string type = "scripted";
    std::string script_path;                      // scripted
    std::string endpoint;                         // http
    std::string model;                            // http
    std::string api_key_env = "DUETKD_API_KEY";   // http
    std::string reply;                            // canned
    int timeout_seconds = 60;
};

struct RunConfig {
    const TaskKind* task = nullptr;
    std::uint64_t seed = 0;
    int n_shot = 4;
    double teacher_threshold = 0.85;
    int distill_batch_size = 8;
    int finetune_batch_size = 0;  // 0 = task default (64 binary, 8 otherwise)
    double lr = 0.1;
    int epochs_per_batch = 1;
    double train_ratio = 0.8;  // holdout split of --train; 1.0 disables
    double temperature = 1.0;
    int max_tokens = 512;
    bool path_confidence = false;
    ScoreAggregation score_aggregation = ScoreAggregation::Mean;
    bool borderline_use_gold = false;  // labeled-ablation mode
    std::string detail_template_path;
    std::string instruction_override_path;
    std::string kernels = "auto";  // auto | scalar | avx2
    int max_batches = 0;           // 0 = all; tests interrupt runs with it
    FeatureSpec embedding{"hashed", 256, 0, ""};  // retrieval side
    FeatureSpec features{"hashed", 256, 0, ""};   // student side
    BackendConfig teacher_backend;
    BackendConfig rationale_backend;
    std::string train_path;
    std::string unlabeled_path;

    int resolved_finetune_batch() const;
};

// Parse and validate a config document (after any --override merges).
RunConfig parse_run_config(const nlohmann::json& doc);

// Read the config file, apply "dotted.path=value" overrides, validate.
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

// Full snapshot of a resolved config; parse_run_config on the result
// reproduces it. Written verbatim to <run_dir>/config.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

// Apply one "dotted.path=value" override to the raw document. The value
// is parsed as JSON when valid (numbers, booleans), else kept as string.
void apply_override(nlohmann::json& doc, const std::string& keyval);

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg);
std::shared_ptr<const EmbeddingProvider> make_embedding_provider(const FeatureSpec& spec);

// Force the configured kernel implementation; "auto" keeps runtime
// detection (and the DUETKD_KERNELS environment override).
void apply_kernel_choice(const std::string& choice);

}  // namespace duetkd
