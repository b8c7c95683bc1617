#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "duetkd/errors.hpp"

namespace duetkd {

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 1.0;
    int max_tokens = 512;
    std::string tag;  // opaque correlation id, echoed in the reply
};

struct ChatReply {
    std::string text;
    std::string tag;
    std::string backend_name;
};

// One completed backend call, written to the run's calls.jsonl.
// latency_ms is 0 for deterministic backends; token counts only when the
// server reports them.
struct CallRecord {
    ChatRequest request;
    ChatReply reply;
    std::int64_t latency_ms = 0;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
};

using CallSink = std::function<void(const CallRecord&)>;

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string name() const = 0;

    // One transport attempt. Implementations throw BackendError (with the
    // retryable flag) or ScriptError; retry policy lives in complete().
    virtual ChatReply send(const ChatRequest& req) = 0;

    // True when send() measures real latency (HTTP); deterministic mocks
    // report 0 so scripted run logs are byte-stable.
    virtual bool measures_latency() const { return false; }

    virtual std::optional<int> last_prompt_tokens() const { return std::nullopt; }
    virtual std::optional<int> last_completion_tokens() const { return std::nullopt; }

    // Replay support: scripted backends report how many entries they have
    // consumed and can fast-forward past them on resume. Live/stateless
    // backends report nullopt and treat fast-forward as a no-op.
    virtual std::optional<std::size_t> consumed_entries() const { return std::nullopt; }
    virtual void fast_forward(std::size_t /*n*/) {}
};

// Issue a request with the engine's retry policy: a retryable failure is
// retried exactly once after an exponential-backoff sleep, then surfaced.
// Every successful call is recorded to the sink (when given).
ChatReply complete(ChatBackend& backend, const ChatRequest& req,
                   const CallSink& sink = nullptr,
                   std::int64_t backoff_ms = 250);

// Replays a fixed reply sequence. An entry may carry a "match" substring
// that must occur in the request text; a mismatch is a test tripwire and
// throws ScriptError. Exhausting the script throws ScriptError too
// (non-retryable).
class ScriptedBackend final : public ChatBackend {
public:
    struct Entry {
        std::optional<std::string> match;
        std::string reply;
        bool fail = false;  // simulate one retryable transport failure
    };

    explicit ScriptedBackend(std::vector<Entry> script, std::string name = "scripted");

    // Load from a JSONL script file of {"match": optional, "reply": text}.
    static std::unique_ptr<ScriptedBackend> from_file(const std::string& path,
                                                      std::string name = "scripted");
    static std::vector<Entry> parse_script_json(const std::string& jsonl_text);

    std::string name() const override { return name_; }
    ChatReply send(const ChatRequest& req) override;

    std::size_t position() const;
    std::size_t size() const { return script_.size(); }
    // Fast-forward past entries already consumed by a previous run segment.
    void skip(std::size_t n);

    std::optional<std::size_t> consumed_entries() const override { return position(); }
    void fast_forward(std::size_t n) override { skip(n); }

private:
    std::vector<Entry> script_;
    std::size_t pos_ = 0;
    std::string name_;
    mutable std::mutex mu_;
};

// Always replies with the same text. Useful where reply content does not
// matter (rationale generation in synthetic runs).
class CannedBackend final : public ChatBackend {
public:
    explicit CannedBackend(std::string reply, std::string name = "canned")
        : reply_(std::move(reply)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    ChatReply send(const ChatRequest& req) override {
        return ChatReply{reply_, req.tag, name_};
    }

private:
    std::string reply_;
    std::string name_;
};

}  // namespace duetkd
