#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include "usersim/llm/key_pool.hpp"
#include "usersim/llm/port.hpp"

namespace usersim {

struct RemoteConfig {
    std::string base_url = "https://api.openai.com";
    std::string model = "gpt-3.5-turbo";
    std::string embedding_model = "text-embedding-ada-002";
    std::size_t embed_dim = 1536;
    std::size_t max_concurrency_per_key = 1;
    std::chrono::milliseconds request_timeout{60000};
    std::chrono::milliseconds retry_base{500};
    double retry_factor = 2.0;
    int max_attempts = 3;
};

/// Raw HTTP exchange, swappable so tests can script responses.
struct HttpResponse {
    int status = 0;  // 0 means the transport failed (timeout, refused, ...)
    std::string body;
};
using HttpPost = std::function<HttpResponse(const std::string& path, const std::string& body,
                                            const std::string& api_key)>;
using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// OpenAI-compatible chat/embedding client. Each call leases a key from the pool
/// and retries transport errors, 429 and 5xx with exponential backoff.
class RemoteBackend final : public LlmPort {
public:
    RemoteBackend(RemoteConfig config, std::shared_ptr<KeyPool> pool, HttpPost post = {}, SleepFn sleep = {});

    std::size_t embed_dim() const override { return config_.embed_dim; }
    std::string name() const override { return "remote:" + config_.model; }
    const RemoteConfig& config() const noexcept { return config_; }

protected:
    std::string do_complete(const CompletionRequest& request) override;
    EmbeddingVector do_embed(std::string_view text) override;

private:
    std::string exchange(const std::string& path, const std::string& body);

    RemoteConfig config_;
    std::shared_ptr<KeyPool> pool_;
    HttpPost post_;
    SleepFn sleep_;
};

/// Default transport built on cpp-httplib.
HttpPost make_httplib_post(const std::string& base_url, std::chrono::milliseconds timeout);

}  // namespace usersim
