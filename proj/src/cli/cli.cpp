#include "duetkd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "duetkd/checkpoint.hpp"
#include "duetkd/config.hpp"
#include "duetkd/data.hpp"
#include "duetkd/events.hpp"
#include "duetkd/metrics.hpp"
#include "duetkd/pipeline.hpp"

namespace fs = std::filesystem;

namespace duetkd {

namespace {

std::unique_ptr<CLI::App> build_app(CliCommand& cmd) {
    auto app = std::make_unique<CLI::App>("interactive LLM-to-linear-student distillation");
    app->name("duetkd");
    app->require_subcommand(1);

    auto* distill = app->add_subcommand("distill", "Run the distillation loop");
    distill->add_option("--config", cmd.config_path, "Run config (JSON)");
    distill->add_option("--train", cmd.train_path, "Labeled training set (JSONL)");
    distill->add_option("--unlabeled", cmd.unlabeled_path, "Unlabeled pool (JSONL)");
    distill->add_option("--out", cmd.out_dir, "Run directory")->required();
    distill->add_flag("--resume", cmd.resume,
                      "Continue the run directory from its checkpoint");
    distill->add_option("--override", cmd.overrides,
                        "Config override key=value (repeatable)");

    auto* eval = app->add_subcommand("eval", "Evaluate a student checkpoint");
    eval->add_option("--model", cmd.model_path, "Student checkpoint")->required();
    eval->add_option("--data", cmd.data_path, "Labeled eval set (JSONL)")->required();
    eval->add_flag("--json", cmd.json_output, "Emit the report as JSON");

    auto* simulate =
        app->add_subcommand("simulate", "Drive a scripted scenario end to end");
    simulate->add_option("--scenario", cmd.scenario_path, "Scenario file (JSON)")->required();
    simulate->add_option("--out", cmd.out_dir, "Run directory")->required();
    simulate->add_option("--override", cmd.overrides,
                         "Config override key=value (repeatable)");

    auto* inspect = app->add_subcommand("inspect", "Summarize a run directory");
    inspect->add_option("--run", cmd.run_dir, "Run directory")->required();

    return app;
}

std::string resolve_verb(const CLI::App& app) {
    for (const char* verb : {"distill", "eval", "simulate", "inspect"})
        if (app.got_subcommand(verb)) return verb;
    return "";
}

WarnFn stderr_warn() {
    return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

int finish_run(const RunResult& res, const RunConfig& cfg, const std::string& run_dir) {
    std::cout << "run directory: " << run_dir << '\n';
    std::cout << "batches: " << res.batches_done << '/' << res.total_batches
              << (res.completed ? " (completed)" : " (stopped early)") << '\n';
    std::cout << "events: " << res.events.size() << '\n';
    if (res.holdout) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", res.holdout->macro_f1);
        std::cout << "holdout macro F1: " << buf << '\n';
    }
    const auto violations = check_run_invariants(res.events, cfg);
    for (const std::string& v : violations)
        std::cerr << "invariant violation: " << v << '\n';
    return violations.empty() ? kExitOk : kExitInvariant;
}

void write_jsonl(const std::string& path, const nlohmann::json& array,
                 const std::string& what) {
    if (!array.is_array()) throw ConfigError(what + " must be a JSON array");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& item : array) out << item.dump() << '\n';
}

// Scenario file: config + inline datasets + reply scripts; everything is
// materialized into the run directory so the run is resumable and
// self-contained.
RunConfig materialize_scenario(const std::string& scenario_path, const std::string& out_dir,
                               const std::vector<std::string>& overrides) {
    std::ifstream in(scenario_path);
    if (!in) throw IoError("cannot read scenario: " + scenario_path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw ConfigError("scenario is not a JSON object: " + scenario_path);

    for (const auto& [key, value] : doc.items()) {
        (void)value;
        static const std::set<std::string> known = {
            "name",   "description",    "config",          "train",
            "unlabeled", "teacher_script", "rationale_script", "rationale_reply"};
        if (!known.count(key))
            throw ConfigError("unknown scenario key \"" + key + "\"");
    }
    for (const char* key : {"config", "train", "unlabeled", "teacher_script"})
        if (!doc.contains(key))
            throw ConfigError(std::string("scenario is missing \"") + key + "\"");
    if (!doc.contains("rationale_script") && !doc.contains("rationale_reply"))
        throw ConfigError("scenario needs rationale_script or rationale_reply");

    fs::create_directories(out_dir);
    write_jsonl(out_dir + "/train.jsonl", doc["train"], "train");
    write_jsonl(out_dir + "/unlabeled.jsonl", doc["unlabeled"], "unlabeled");
    write_jsonl(out_dir + "/teacher_script.jsonl", doc["teacher_script"], "teacher_script");

    nlohmann::json cfg_doc = doc["config"];
    for (const std::string& kv : overrides) apply_override(cfg_doc, kv);
    cfg_doc["train_path"] = out_dir + "/train.jsonl";
    cfg_doc["unlabeled_path"] = out_dir + "/unlabeled.jsonl";
    cfg_doc["teacher_backend"] = {{"type", "scripted"},
                                  {"script", out_dir + "/teacher_script.jsonl"}};
    if (doc.contains("rationale_reply")) {
        cfg_doc["rationale_backend"] = {{"type", "canned"},
                                        {"reply", doc["rationale_reply"].get<std::string>()}};
    } else {
        write_jsonl(out_dir + "/rationale_script.jsonl", doc["rationale_script"],
                    "rationale_script");
        cfg_doc["rationale_backend"] = {{"type", "scripted"},
                                        {"script", out_dir + "/rationale_script.jsonl"}};
    }
    return parse_run_config(cfg_doc);
}

struct BatchRow {
    std::size_t samples = 0;
    std::size_t confident = 0;
    std::size_t items = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    bool trained = false;
    std::string borderline;
    double borderline_score = 0.0;
    int template_size = -1;  // -1 = no update this batch
};

}  // namespace

CliCommand parse_args(const std::vector<std::string>& args) {
    CliCommand cmd;
    auto app = build_app(cmd);
    std::vector<const char*> argv;
    argv.push_back("duetkd");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app->parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        throw UsageError(std::string(e.get_name()) + ": " + e.what());
    }
    cmd.verb = resolve_verb(*app);
    return cmd;
}

int cmd_distill(const CliCommand& cmd) {
    if (cmd.resume) {
        RunResult res = resume_run(cmd.out_dir, stderr_warn());
        RunConfig cfg = load_run_config(cmd.out_dir + "/config");
        return finish_run(res, cfg, cmd.out_dir);
    }
    for (const auto& [flag, value] :
         std::map<std::string, const std::string*>{{"--config", &cmd.config_path},
                                                   {"--train", &cmd.train_path},
                                                   {"--unlabeled", &cmd.unlabeled_path}})
        if (value->empty()) throw UsageError("distill requires " + flag);

    RunConfig cfg = load_run_config(cmd.config_path, cmd.overrides);
    cfg.train_path = cmd.train_path;
    cfg.unlabeled_path = cmd.unlabeled_path;
    RunResult res = start_run(cfg, cmd.out_dir, stderr_warn());
    return finish_run(res, cfg, cmd.out_dir);
}

int cmd_eval(const CliCommand& cmd) {
    LoadedCheckpoint ckpt = load_checkpoint(cmd.model_path);
    const TaskKind& task = task_by_name(ckpt.meta.task_name);
    Dataset data = load_dataset(cmd.data_path, task);
    Featurizer features(ckpt.meta.features);
    MetricsReport report = evaluate_student(ckpt.model, data, features);
    if (cmd.json_output)
        std::cout << report.to_json() << '\n';
    else
        std::cout << report.to_text();
    return kExitOk;
}

int cmd_simulate(const CliCommand& cmd) {
    RunConfig cfg = materialize_scenario(cmd.scenario_path, cmd.out_dir, cmd.overrides);
    RunResult res = start_run(cfg, cmd.out_dir, stderr_warn());
    return finish_run(res, cfg, cmd.out_dir);
}

int cmd_inspect(const CliCommand& cmd) {
    const std::string dir = cmd.run_dir;
    if (!fs::exists(dir + "/config") || !fs::exists(dir + "/events.jsonl"))
        throw IoError("not a run directory (missing config/events.jsonl): " + dir);
    RunConfig cfg = load_run_config(dir + "/config");
    std::vector<RunEvent> events = read_events(dir + "/events.jsonl");

    std::map<int, BatchRow> rows;
    std::size_t teacher_calls = 0, reprompt_count = 0, parse_failures = 0;
    std::vector<std::string> borderline_history;
    for (const RunEvent& e : events) {
        BatchRow& row = rows[e.batch_index];
        switch (e.kind) {
            case EventKind::TeacherCall:
                ++teacher_calls;
                break;
            case EventKind::Reprompt:
                ++reprompt_count;
                break;
            case EventKind::ParseFailure:
                ++parse_failures;
                break;
            case EventKind::BatchTrained:
                row.trained = true;
                row.samples = e.payload.value("batch_samples", std::size_t{0});
                row.confident = e.payload.at("trained_ids").size();
                row.items = e.payload.value("items", std::size_t{0});
                row.loss_before = e.payload.value("loss_before", 0.0);
                row.loss_after = e.payload.value("loss_after", 0.0);
                break;
            case EventKind::BorderlineSelected:
                row.borderline = e.sample_id;
                row.borderline_score = e.payload.value("score", 0.0);
                borderline_history.push_back(e.sample_id);
                break;
            case EventKind::TemplateUpdated:
                row.template_size = e.payload.value("size", 0);
                break;
        }
    }

    std::cout << "run: " << dir << '\n';
    std::cout << "task: " << task_name(cfg.task->id) << "  batches: " << rows.size()
              << "  events: " << events.size() << '\n';
    std::cout << "batch  samples  confident  items  loss               borderline\n";
    char buf[256];
    for (const auto& [batch, row] : rows) {
        if (!row.trained) continue;
        std::string borderline = row.borderline.empty() ? "-" : row.borderline;
        if (!row.borderline.empty()) {
            char score[32];
            std::snprintf(score, sizeof(score), " (%.4f)", row.borderline_score);
            borderline += score;
        }
        if (row.template_size >= 0)
            borderline += ", template size " + std::to_string(row.template_size);
        std::snprintf(buf, sizeof(buf), "%-5d  %-7zu  %-9zu  %-5zu  %8.4f -> %8.4f  %s\n",
                      batch, row.samples, row.confident, row.items, row.loss_before,
                      row.loss_after, borderline.c_str());
        std::cout << buf;
    }
    double rate = teacher_calls == 0
                      ? 0.0
                      : 100.0 * static_cast<double>(reprompt_count) /
                            static_cast<double>(teacher_calls);
    std::snprintf(buf, sizeof(buf), "reprompt rate: %.1f%% (%zu/%zu)\n", rate, reprompt_count,
                  teacher_calls);
    std::cout << buf;
    std::cout << "parse failures: " << parse_failures << '\n';
    std::cout << "borderline history:";
    if (borderline_history.empty()) std::cout << " (none)";
    for (const std::string& id : borderline_history) std::cout << ' ' << id;
    std::cout << '\n';
    if (fs::exists(dir + "/metrics.json")) {
        std::ifstream metrics(dir + "/metrics.json");
        std::cout << "final metrics:\n" << metrics.rdbuf();
    } else {
        std::cout << "final metrics: (none)\n";
    }
    return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
    CliCommand cmd;
    auto app = build_app(cmd);
    try {
        app->parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app->exit(e);  // prints usage, exit 0
    } catch (const CLI::ParseError& e) {
        app->exit(e);
        return kExitUsage;
    }
    cmd.verb = resolve_verb(*app);

    try {
        if (cmd.verb == "distill") return cmd_distill(cmd);
        if (cmd.verb == "eval") return cmd_eval(cmd);
        if (cmd.verb == "simulate") return cmd_simulate(cmd);
        if (cmd.verb == "inspect") return cmd_inspect(cmd);
        throw UsageError("unknown verb");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace duetkd
