#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "duetkd/checkpoint.hpp"
#include "duetkd/cli.hpp"
#include "duetkd/config.hpp"
#include "duetkd/events.hpp"
#include "duetkd/pipeline.hpp"

using namespace duetkd;

namespace {

std::string scenario(const std::string& name) {
    return std::string(DUETKD_SCENARIO_DIR) + "/" + name;
}

// Redirect a stream into a buffer for the lifetime of the guard.
class Capture {
public:
    explicit Capture(std::ostream& os) : os_(os), old_(os.rdbuf(buf_.rdbuf())) {}
    ~Capture() { os_.rdbuf(old_); }
    std::string text() const { return buf_.str(); }

private:
    std::ostream& os_;
    std::ostringstream buf_;
    std::streambuf* old_;
};

int run_argv(std::vector<std::string> args) {
    std::vector<const char*> argv;
    argv.push_back("duetkd");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::size_t count_kind(const std::vector<RunEvent>& events, EventKind kind) {
    std::size_t n = 0;
    for (const RunEvent& e : events) n += e.kind == kind;
    return n;
}

std::vector<std::vector<std::string>> trained_ids_per_batch(
    const std::vector<RunEvent>& events) {
    std::vector<std::vector<std::string>> out;
    for (const RunEvent& e : events)
        if (e.kind == EventKind::BatchTrained)
            out.push_back(e.payload.at("trained_ids").get<std::vector<std::string>>());
    return out;
}

}  // namespace

TEST_CASE("parse_args resolves verbs and flags") {
    CliCommand cmd = parse_args({"distill", "--config", "c.json", "--train", "t.jsonl",
                                 "--unlabeled", "u.jsonl", "--out", "rundir", "--override",
                                 "lr=0.5", "--override", "seed=3"});
    CHECK(cmd.verb == "distill");
    CHECK(cmd.config_path == "c.json");
    CHECK(cmd.train_path == "t.jsonl");
    CHECK(cmd.unlabeled_path == "u.jsonl");
    CHECK(cmd.out_dir == "rundir");
    CHECK(!cmd.resume);
    CHECK(cmd.overrides == std::vector<std::string>{"lr=0.5", "seed=3"});

    CHECK(parse_args({"distill", "--out", "d", "--resume"}).resume);

    cmd = parse_args({"eval", "--model", "m.ckpt", "--data", "d.jsonl", "--json"});
    CHECK(cmd.verb == "eval");
    CHECK(cmd.model_path == "m.ckpt");
    CHECK(cmd.data_path == "d.jsonl");
    CHECK(cmd.json_output);

    cmd = parse_args({"simulate", "--scenario", "s.json", "--out", "dir"});
    CHECK(cmd.verb == "simulate");
    CHECK(cmd.scenario_path == "s.json");

    cmd = parse_args({"inspect", "--run", "dir"});
    CHECK(cmd.verb == "inspect");
    CHECK(cmd.run_dir == "dir");
}

TEST_CASE("parse_args rejects bad command lines") {
    CHECK_THROWS_AS(parse_args({}), UsageError);                      // no verb
    CHECK_THROWS_AS(parse_args({"train"}), UsageError);               // unknown verb
    CHECK_THROWS_AS(parse_args({"distill", "--bogus", "x"}), UsageError);
    CHECK_THROWS_WITH_AS(parse_args({"distill"}), doctest::Contains("--out"), UsageError);
    CHECK_THROWS_WITH_AS(parse_args({"simulate", "--out", "d"}),
                         doctest::Contains("--scenario"), UsageError);
    CHECK_THROWS_AS(parse_args({"eval", "--model", "m"}), UsageError);  // missing --data
    CHECK_THROWS_AS(parse_args({"--help"}), UsageError);
}

TEST_CASE("cmd_distill insists on its input flags") {
    CliCommand cmd;
    cmd.verb = "distill";
    cmd.out_dir = "somewhere";
    CHECK_THROWS_WITH_AS(cmd_distill(cmd), doctest::Contains("--config"), UsageError);
    cmd.config_path = "c.json";
    CHECK_THROWS_WITH_AS(cmd_distill(cmd), doctest::Contains("--train"), UsageError);
    cmd.train_path = "t.jsonl";
    CHECK_THROWS_WITH_AS(cmd_distill(cmd), doctest::Contains("--unlabeled"), UsageError);
}

TEST_CASE("simulate drives the happy-path scenario to completion") {
    testutil::TempDir tmp("cli");
    CliCommand cmd;
    cmd.verb = "simulate";
    cmd.scenario_path = scenario("happy_path.json");
    cmd.out_dir = tmp.file("run");

    Capture out(std::cout);
    CHECK(cmd_simulate(cmd) == kExitOk);
    CHECK(out.text().find("batches: 2/2 (completed)") != std::string::npos);

    auto events = read_events(tmp.file("run/events.jsonl"));
    CHECK(count_kind(events, EventKind::TeacherCall) == 8);
    CHECK(count_kind(events, EventKind::Reprompt) == 0);
    CHECK(count_kind(events, EventKind::ParseFailure) == 0);
    CHECK(count_kind(events, EventKind::BatchTrained) == 2);
    CHECK(count_kind(events, EventKind::BorderlineSelected) == 2);

    auto per_batch = trained_ids_per_batch(events);
    REQUIRE(per_batch.size() == 2);
    CHECK(per_batch[0] == std::vector<std::string>{"u0", "u1", "u2", "u3"});
    CHECK(per_batch[1] == std::vector<std::string>{"u4", "u5", "u6", "u7"});

    // The materialized inputs and the run artifacts are all in place.
    for (const char* name : {"train.jsonl", "unlabeled.jsonl", "teacher_script.jsonl",
                             "config", "student.ckpt", "template.json"})
        CHECK(!testutil::read_file(tmp.file("run/" + std::string(name))).empty());

    LoadedCheckpoint ckpt = load_checkpoint(tmp.file("run/student.ckpt"));
    CHECK(ckpt.meta.batches_done == 2);
    CHECK(ckpt.meta.task_name == "binary_green");
}

TEST_CASE("simulate applies overrides before the run starts") {
    testutil::TempDir tmp("cli");
    CliCommand cmd;
    cmd.verb = "simulate";
    cmd.scenario_path = scenario("happy_path.json");
    cmd.out_dir = tmp.file("run");
    cmd.overrides = {"teacher_threshold=0.75", "lr=0.25"};

    Capture out(std::cout);
    CHECK(cmd_simulate(cmd) == kExitOk);

    auto cfg_doc = nlohmann::json::parse(testutil::read_file(tmp.file("run/config")));
    CHECK(cfg_doc.at("teacher_threshold").get<double>() == doctest::Approx(0.75));
    CHECK(cfg_doc.at("lr").get<double>() == doctest::Approx(0.25));

    // A malformed override is a config error, surfaced before any run state
    // is created.
    CliCommand bad = cmd;
    bad.out_dir = tmp.file("bad");
    bad.overrides = {"no_equals_sign"};
    CHECK_THROWS_AS(cmd_simulate(bad), ConfigError);
}

TEST_CASE("the same scenario replays byte-identically") {
    testutil::TempDir tmp("cli");
    for (const char* dir : {"one", "two"}) {
        CliCommand cmd;
        cmd.verb = "simulate";
        cmd.scenario_path = scenario("happy_path.json");
        cmd.out_dir = tmp.file(dir);
        Capture out(std::cout);
        REQUIRE(cmd_simulate(cmd) == kExitOk);
    }
    for (const char* name : {"events.jsonl", "student.ckpt", "template.json"})
        CHECK(testutil::read_file(tmp.file("one/" + std::string(name))) ==
              testutil::read_file(tmp.file("two/" + std::string(name))));
}

TEST_CASE("malformed teacher replies are logged and excluded from training") {
    testutil::TempDir tmp("cli");
    CliCommand cmd;
    cmd.verb = "simulate";
    cmd.scenario_path = scenario("malformed_replies.json");
    cmd.out_dir = tmp.file("run");

    Capture out(std::cout);
    CHECK(cmd_simulate(cmd) == kExitOk);  // invariants hold despite the failures

    auto events = read_events(tmp.file("run/events.jsonl"));
    CHECK(count_kind(events, EventKind::ParseFailure) == 3);  // u1 twice, u4 once
    CHECK(count_kind(events, EventKind::Reprompt) == 2);

    // u1 never produced a usable label; u4 recovered on the second call.
    auto per_batch = trained_ids_per_batch(events);
    REQUIRE(per_batch.size() == 2);
    CHECK(per_batch[0] == std::vector<std::string>{"u0", "u2"});
    CHECK(per_batch[1] == std::vector<std::string>{"u3", "u4", "u5"});

    for (const RunEvent& e : events) {
        if (e.kind != EventKind::Reprompt) continue;
        CHECK(e.payload.at("reason") == "parse_failure");
        if (e.sample_id == "u1") CHECK(e.payload.at("final") == "unconfident");
        if (e.sample_id == "u4") CHECK(e.payload.at("final") == "confident");
    }
}

TEST_CASE("eval reports metrics for a stored checkpoint") {
    testutil::TempDir tmp("cli");
    CliCommand sim;
    sim.verb = "simulate";
    sim.scenario_path = scenario("happy_path.json");
    sim.out_dir = tmp.file("run");
    {
        Capture out(std::cout);
        REQUIRE(cmd_simulate(sim) == kExitOk);
    }

    CliCommand eval;
    eval.verb = "eval";
    eval.model_path = tmp.file("run/student.ckpt");
    eval.data_path = tmp.file("run/train.jsonl");
    eval.json_output = true;
    Capture out(std::cout);
    CHECK(cmd_eval(eval) == kExitOk);

    auto report = nlohmann::json::parse(out.text());
    CHECK(report.at("n_eval").get<int>() == 5);
    CHECK(report.at("per_class").size() == 2);
    CHECK(report.at("macro_f1").get<double>() >= 0.0);

    // Text mode mentions the headline numbers.
    CliCommand text_eval = eval;
    text_eval.json_output = false;
    Capture text_out(std::cout);
    CHECK(cmd_eval(text_eval) == kExitOk);
    CHECK(text_out.text().find("macro") != std::string::npos);
}

TEST_CASE("inspect summarizes a finished run") {
    testutil::TempDir tmp("cli");
    CliCommand sim;
    sim.verb = "simulate";
    sim.scenario_path = scenario("happy_path.json");
    sim.out_dir = tmp.file("run");
    {
        Capture out(std::cout);
        REQUIRE(cmd_simulate(sim) == kExitOk);
    }

    CliCommand ins;
    ins.verb = "inspect";
    ins.run_dir = tmp.file("run");
    Capture out(std::cout);
    CHECK(cmd_inspect(ins) == kExitOk);

    const std::string text = out.text();
    CHECK(text.find("task: binary_green") != std::string::npos);
    CHECK(text.find("batches: 2") != std::string::npos);
    CHECK(text.find("reprompt rate: 0.0% (0/8)") != std::string::npos);
    CHECK(text.find("parse failures: 0") != std::string::npos);
    CHECK(text.find("borderline history:") != std::string::npos);
    CHECK(text.find("final metrics: (none)") != std::string::npos);

    // An unrelated directory is rejected up front.
    CliCommand bad;
    bad.verb = "inspect";
    bad.run_dir = tmp.file("empty");
    CHECK_THROWS_WITH_AS(cmd_inspect(bad), doctest::Contains("not a run directory"), IoError);
}

TEST_CASE("a run interrupted through the CLI resumes to the same bytes") {
    testutil::TempDir tmp("cli");

    // Reference: the uninterrupted scenario.
    CliCommand full;
    full.verb = "simulate";
    full.scenario_path = scenario("resume_three_batches.json");
    full.out_dir = tmp.file("full");
    {
        Capture out(std::cout);
        REQUIRE(cmd_simulate(full) == kExitOk);
        CHECK(out.text().find("batches: 3/3 (completed)") != std::string::npos);
    }

    // Same scenario stopped after one batch.
    CliCommand partial = full;
    partial.out_dir = tmp.file("resumed");
    partial.overrides = {"max_batches=1"};
    {
        Capture out(std::cout);
        REQUIRE(cmd_simulate(partial) == kExitOk);
        CHECK(out.text().find("batches: 1/3 (stopped early)") != std::string::npos);
    }

    // distill --resume picks the directory back up and finishes it.
    CliCommand resume;
    resume.verb = "distill";
    resume.out_dir = tmp.file("resumed");
    resume.resume = true;
    {
        Capture out(std::cout);
        CHECK(cmd_distill(resume) == kExitOk);
        CHECK(out.text().find("batches: 3/3 (completed)") != std::string::npos);
    }

    for (const char* name : {"events.jsonl", "student.ckpt", "template.json",
                             "rationale_cache.jsonl"})
        CHECK(testutil::read_file(tmp.file("resumed/" + std::string(name))) ==
              testutil::read_file(tmp.file("full/" + std::string(name))));

    // Resuming the already-finished run changes nothing and still succeeds.
    const std::string before = testutil::read_file(tmp.file("resumed/events.jsonl"));
    Capture out(std::cout);
    CHECK(cmd_distill(resume) == kExitOk);
    CHECK(testutil::read_file(tmp.file("resumed/events.jsonl")) == before);
}

TEST_CASE("the distill verb runs from a config file with overrides") {
    testutil::TempDir tmp("cli");

    // Datasets and teacher script on disk, referenced by the config.
    testutil::write_file(
        tmp.file("train.jsonl"),
        R"({"id":"t0","context":"rooftop solar panels cut household grid emissions","label":1})"
        "\n"
        R"({"id":"t1","context":"a coal boiler upgrade without capture stays carbon heavy","label":0})"
        "\n"
        R"({"id":"t2","context":"wind turbines supply the plant with renewable power","label":1})"
        "\n");
    testutil::write_file(
        tmp.file("unlabeled.jsonl"),
        R"({"id":"u0","context":"the district swaps oil heating for geothermal wells"})"
        "\n"
        R"({"id":"u1","context":"the quarry doubles blasting to meet cement demand"})"
        "\n");
    std::string script;
    script += nlohmann::json{
        {"reply", R"({"Answer": "yes", "Confidence": 90, "Rationale": "swap"})"}}.dump();
    script += "\n";
    script += nlohmann::json{
        {"reply", R"({"Answer": "no", "Confidence": 88, "Rationale": "more blasting"})"}}.dump();
    script += "\n";
    testutil::write_file(tmp.file("teacher.jsonl"), script);

    nlohmann::json cfg_doc = {
        {"task", "binary_green"},
        {"seed", 3},
        {"n_shot", 1},
        {"distill_batch_size", 2},
        {"lr", 0.5},
        {"train_ratio", 1.0},
        {"embedding", {{"kind", "hashed"}, {"dim", 32}}},
        {"features", {{"kind", "hashed"}, {"dim", 32}}},
        {"teacher_backend", {{"type", "scripted"}, {"script", tmp.file("teacher.jsonl")}}},
        {"rationale_backend", {{"type", "canned"}, {"reply", "a canned rationale"}}},
    };
    testutil::write_file(tmp.file("config.json"), cfg_doc.dump(2));

    CliCommand cmd;
    cmd.verb = "distill";
    cmd.config_path = tmp.file("config.json");
    cmd.train_path = tmp.file("train.jsonl");
    cmd.unlabeled_path = tmp.file("unlabeled.jsonl");
    cmd.out_dir = tmp.file("run");
    cmd.overrides = {"lr=0.25"};

    Capture out(std::cout);
    CHECK(cmd_distill(cmd) == kExitOk);
    CHECK(out.text().find("batches: 1/1 (completed)") != std::string::npos);

    auto written = nlohmann::json::parse(testutil::read_file(tmp.file("run/config")));
    CHECK(written.at("lr").get<double>() == doctest::Approx(0.25));
    CHECK(written.at("train_path").get<std::string>() == tmp.file("train.jsonl"));
}

TEST_CASE("run_cli maps outcomes to exit codes") {
    testutil::TempDir tmp("cli");

    // Usage problems shown by CLI11 itself.
    {
        Capture err(std::cerr);
        Capture out(std::cout);
        CHECK(run_argv({"distill", "--nonsense"}) == kExitUsage);
    }
    {
        Capture out(std::cout);
        CHECK(run_argv({"--help"}) == kExitOk);
        CHECK(out.text().find("distill") != std::string::npos);
    }

    // Runtime failures (bad paths) exit 2 with a diagnostic.
    {
        Capture err(std::cerr);
        Capture out(std::cout);
        CHECK(run_argv({"inspect", "--run", tmp.file("nowhere")}) == kExitRuntime);
        CHECK(err.text().find("error:") != std::string::npos);
    }

    // A full verb through the dispatcher.
    {
        Capture out(std::cout);
        CHECK(run_argv({"simulate", "--scenario", scenario("happy_path.json"), "--out",
                        tmp.file("run")}) == kExitOk);
    }
}
