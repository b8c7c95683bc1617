#pragma once

#include <memory>
#include <mutex>

#include "duetkd/backend.hpp"
#include "duetkd/embedding.hpp"

namespace duetkd {

// Splits "http://host:port/some/path" into base ("http://host:port") and
// path ("/some/path"). An empty path maps to default_path.
struct EndpointParts {
    std::string base;
    std::string path;
};
EndpointParts split_endpoint(const std::string& url, const std::string& default_path);

// Chat-completions-compatible HTTP client: POSTs
//   {"model", "messages": [{role, content}...], "temperature", "max_tokens"}
// and reads choices[0].message.content. The API key (optional) is sent as
// a bearer token.
class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(std::string endpoint, std::string model, std::string api_key = "",
                    int timeout_seconds = 60);
    ~HttpChatBackend() override;

    std::string name() const override;
    ChatReply send(const ChatRequest& req) override;
    bool measures_latency() const override { return true; }
    std::optional<int> last_prompt_tokens() const override { return last_prompt_tokens_; }
    std::optional<int> last_completion_tokens() const override { return last_completion_tokens_; }

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
    int timeout_seconds_;
    std::optional<int> last_prompt_tokens_;
    std::optional<int> last_completion_tokens_;
    std::mutex mu_;
};

// Embedding-service client: POSTs {"texts": [...]} and reads
// {"vectors": [[...], ...]}. Vector dimensions are validated against the
// configured dim.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string endpoint, std::size_t dim, int timeout_seconds = 60);

    std::size_t dim() const override { return dim_; }
    EmbeddingVector embed(const std::string& text) const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const;
    std::string name() const override { return "http"; }

private:
    std::string endpoint_;
    std::size_t dim_;
    int timeout_seconds_;
    mutable std::mutex mu_;
};

}  // namespace duetkd
