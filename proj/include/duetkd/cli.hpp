#pragma once

#include <string>
#include <vector>

#include "duetkd/errors.hpp"

namespace duetkd {

// Exit codes of the duetkd tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitInvariant = 3;

// Bad command line (unknown verb/flag, missing required path).
struct UsageError : Error {
    using Error::Error;
};

struct CliCommand {
    std::string verb;  // distill | eval | simulate | inspect
    std::string config_path;
    std::string train_path;
    std::string unlabeled_path;
    std::string out_dir;
    std::string model_path;
    std::string data_path;
    std::string scenario_path;
    std::string run_dir;
    bool resume = false;
    bool json_output = false;
    std::vector<std::string> overrides;  // key=value, applied after the config file
};

// Parse a command line (without the program name). Throws UsageError on
// bad input; "--help" anywhere also surfaces as UsageError carrying the
// usage text (run_cli handles help directly instead).
CliCommand parse_args(const std::vector<std::string>& args);

// Verb entry points; each returns an exit code.
int cmd_distill(const CliCommand& cmd);
int cmd_eval(const CliCommand& cmd);
int cmd_simulate(const CliCommand& cmd);
int cmd_inspect(const CliCommand& cmd);

// Full dispatch: parse argv, run the verb, map errors to exit codes.
int run_cli(int argc, const char* const* argv);

}  // namespace duetkd
