#pragma once

#include <stdexcept>
#include <string>

namespace duetkd {

// Base class for all engine errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
    using Error::Error;
};

// Bad value in data or configuration (out-of-range label, duplicate id, ...).
struct ValueError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// A chat reply that does not contain a well-formed object for the task
// schema. Carries the offending text.
struct ParseFailure : Error {
    ParseFailure(const std::string& msg, std::string offending)
        : Error(msg + ": " + offending), text(std::move(offending)) {}
    std::string text;
};

// Backend transport / protocol failure. Retryable failures are retried
// once by complete(); the rest surface immediately.
struct BackendError : Error {
    BackendError(const std::string& msg, bool retryable_) : Error(msg), retryable(retryable_) {}
    bool retryable;
};

// Scripted backend ran past the end of its script, or a match tripwire fired.
struct ScriptError : Error {
    using Error::Error;
};

// Span phrase not found as a token subsequence of the context.
struct AlignmentFailure : Error {
    using Error::Error;
};

// Technology and effect spans claim overlapping tokens.
struct OverlapFailure : Error {
    using Error::Error;
};

// Checkpoint or run-directory content failed its integrity check.
struct IntegrityError : Error {
    using Error::Error;
};

}  // namespace duetkd
