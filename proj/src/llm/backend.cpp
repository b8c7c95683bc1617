#include "duetkd/backend.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace duetkd {

ChatReply complete(ChatBackend& backend, const ChatRequest& req, const CallSink& sink,
                   std::int64_t backoff_ms) {
    if (req.user_text.empty()) throw ValueError("ChatRequest.user_text must be non-empty");
    if (req.temperature < 0.0) throw ValueError("ChatRequest.temperature must be >= 0");

    int attempt = 0;
    for (;;) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            ChatReply reply = backend.send(req);
            if (sink) {
                CallRecord rec;
                rec.request = req;
                rec.reply = reply;
                if (backend.measures_latency()) {
                    auto t1 = std::chrono::steady_clock::now();
                    rec.latency_ms =
                        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
                }
                rec.prompt_tokens = backend.last_prompt_tokens();
                rec.completion_tokens = backend.last_completion_tokens();
                sink(rec);
            }
            return reply;
        } catch (const BackendError& e) {
            // At most one retry per request.
            if (!e.retryable || attempt >= 1) throw;
            ++attempt;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << (attempt - 1)));
        }
    }
}

ScriptedBackend::ScriptedBackend(std::vector<Entry> script, std::string name)
    : script_(std::move(script)), name_(std::move(name)) {}

std::vector<ScriptedBackend::Entry> ScriptedBackend::parse_script_json(
    const std::string& jsonl_text) {
    std::vector<Entry> entries;
    std::istringstream in(jsonl_text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValueError("script line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("reply") || !j["reply"].is_string())
            throw ValueError("script line " + std::to_string(line_no) +
                             ": entry needs a string 'reply'");
        Entry e;
        e.reply = j["reply"].get<std::string>();
        if (j.contains("match") && !j["match"].is_null())
            e.match = j["match"].get<std::string>();
        if (j.contains("fail")) e.fail = j["fail"].get<bool>();
        entries.push_back(std::move(e));
    }
    return entries;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path,
                                                            std::string name) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return std::make_unique<ScriptedBackend>(parse_script_json(buf.str()), std::move(name));
}

ChatReply ScriptedBackend::send(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    if (pos_ >= script_.size())
        throw ScriptError("script exhausted after " + std::to_string(script_.size()) +
                          " replies (backend " + name_ + ")");
    const Entry& e = script_[pos_];
    if (e.match &&
        req.user_text.find(*e.match) == std::string::npos &&
        req.system_text.find(*e.match) == std::string::npos) {
        throw ScriptError("script entry " + std::to_string(pos_) + " expected request to contain \"" +
                          *e.match + "\"");
    }
    ++pos_;
    if (e.fail) throw BackendError("scripted transport failure", /*retryable=*/true);
    return ChatReply{e.reply, req.tag, name_};
}

std::size_t ScriptedBackend::position() const {
    std::lock_guard<std::mutex> lock(mu_);
    return pos_;
}

void ScriptedBackend::skip(std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    if (n > script_.size())
        throw ScriptError("cannot skip " + std::to_string(n) + " entries of a " +
                          std::to_string(script_.size()) + "-entry script");
    pos_ = n;
}

}  // namespace duetkd
