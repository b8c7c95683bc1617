#include "duetkd/http_backend.hpp"

#include <httplib.h>
#include <json.hpp>

namespace duetkd {

EndpointParts split_endpoint(const std::string& url, const std::string& default_path) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint URL must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, default_path};
    std::string path = url.substr(path_start);
    if (path.empty() || path == "/") path = default_path;
    return {url.substr(0, path_start), path};
}

namespace {

httplib::Client make_client(const std::string& base, int timeout_seconds) {
    httplib::Client cli(base);
    cli.set_connection_timeout(timeout_seconds, 0);
    cli.set_read_timeout(timeout_seconds, 0);
    cli.set_write_timeout(timeout_seconds, 0);
    return cli;
}

}  // namespace

HttpChatBackend::HttpChatBackend(std::string endpoint, std::string model, std::string api_key,
                                 int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
    if (endpoint_.empty()) throw ConfigError("http chat backend needs an endpoint URL");
    if (model_.empty()) throw ConfigError("http chat backend needs a model name");
}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::name() const { return "http:" + model_; }

ChatReply HttpChatBackend::send(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    auto parts = split_endpoint(endpoint_, "/v1/chat/completions");
    auto cli = make_client(parts.base, timeout_seconds_);

    nlohmann::ordered_json body;
    body["model"] = model_;
    auto& messages = body["messages"] = nlohmann::ordered_json::array();
    if (!req.system_text.empty())
        messages.push_back({{"role", "system"}, {"content", req.system_text}});
    messages.push_back({{"role", "user"}, {"content", req.user_text}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = cli.Post(parts.path, headers, body.dump(), "application/json");
    if (!res)
        throw BackendError("chat transport failure: " + httplib::to_string(res.error()),
                           /*retryable=*/true);
    if (res->status < 200 || res->status >= 300)
        throw BackendError("chat endpoint returned status " + std::to_string(res->status),
                           /*retryable=*/res->status >= 500 || res->status == 429);

    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty() || !j["choices"][0].contains("message") ||
        !j["choices"][0]["message"].contains("content"))
        throw BackendError("chat endpoint returned an unexpected body", /*retryable=*/false);

    last_prompt_tokens_.reset();
    last_completion_tokens_.reset();
    if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer())
            last_prompt_tokens_ = u["prompt_tokens"].get<int>();
        if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer())
            last_completion_tokens_ = u["completion_tokens"].get<int>();
    }

    std::string content;
    const auto& c = j["choices"][0]["message"]["content"];
    if (c.is_string()) content = c.get<std::string>();
    return ChatReply{content, req.tag, name()};
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::size_t dim,
                                             int timeout_seconds)
    : endpoint_(std::move(endpoint)), dim_(dim), timeout_seconds_(timeout_seconds) {
    if (endpoint_.empty()) throw ConfigError("http embedding provider needs an endpoint URL");
    if (dim_ == 0) throw ConfigError("http embedding provider needs a positive dim");
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto parts = split_endpoint(endpoint_, "/embed");
    auto cli = make_client(parts.base, timeout_seconds_);

    nlohmann::json body;
    body["texts"] = texts;
    auto res = cli.Post(parts.path, body.dump(), "application/json");
    if (!res)
        throw BackendError("embedding transport failure: " + httplib::to_string(res.error()),
                           /*retryable=*/true);
    if (res->status < 200 || res->status >= 300)
        throw BackendError("embedding endpoint returned status " + std::to_string(res->status),
                           /*retryable=*/res->status >= 500);

    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("vectors") || !j["vectors"].is_array() ||
        j["vectors"].size() != texts.size())
        throw BackendError("embedding endpoint returned an unexpected body", /*retryable=*/false);

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& row : j["vectors"]) {
        EmbeddingVector v;
        if (!row.is_array())
            throw BackendError("embedding endpoint vector is not an array", false);
        for (const auto& x : row) v.values.push_back(x.get<double>());
        if (v.dim() != dim_)
            throw DimensionError("embedding service returned dim " + std::to_string(v.dim()) +
                                 ", configured dim " + std::to_string(dim_));
        out.push_back(std::move(v));
    }
    return out;
}

EmbeddingVector HttpEmbeddingProvider::embed(const std::string& text) const {
    return embed_batch({text})[0];
}

}  // namespace duetkd
