#include "usersim/llm/remote_backend.hpp"

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "usersim/core/error.hpp"

namespace usersim {

using nlohmann::json;

HttpPost make_httplib_post(const std::string& base_url, std::chrono::milliseconds timeout) {
    return [base_url, timeout](const std::string& path, const std::string& body, const std::string& key) {
        httplib::Client client(base_url);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
        client.set_connection_timeout(static_cast<time_t>(secs), 0);
        client.set_read_timeout(static_cast<time_t>(secs), 0);
        httplib::Headers headers{{"Authorization", "Bearer " + key}};
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) return HttpResponse{0, httplib::to_string(res.error())};
        return HttpResponse{res->status, res->body};
    };
}

RemoteBackend::RemoteBackend(RemoteConfig config, std::shared_ptr<KeyPool> pool, HttpPost post, SleepFn sleep)
    : config_(std::move(config)), pool_(std::move(pool)), post_(std::move(post)), sleep_(std::move(sleep)) {
    if (!pool_) throw SimError(ErrorCode::InvalidInput, "remote backend needs a key pool");
    if (config_.max_attempts < 1) throw SimError(ErrorCode::ConfigInvalid, "max_attempts must be >= 1");
    if (!post_) post_ = make_httplib_post(config_.base_url, config_.request_timeout);
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string RemoteBackend::exchange(const std::string& path, const std::string& body) {
    auto delay = config_.retry_base;
    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        HttpResponse res;
        {
            auto lease = pool_->acquire();
            res = post_(path, body, lease.key());
        }
        if (res.status >= 200 && res.status < 300) return res.body;
        const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
        last_error = res.status == 0 ? "transport error: " + res.body : "HTTP " + std::to_string(res.status);
        if (!retryable) throw SimError(ErrorCode::RemoteUnavailable, last_error);
        if (attempt < config_.max_attempts) {
            sleep_(delay);
            delay = std::chrono::milliseconds(static_cast<long long>(delay.count() * config_.retry_factor));
        }
    }
    throw SimError(ErrorCode::RemoteUnavailable,
                   last_error + " after " + std::to_string(config_.max_attempts) + " attempts");
}

std::string RemoteBackend::do_complete(const CompletionRequest& request) {
    json body = {{"model", config_.model},
                 {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
                 {"max_tokens", request.max_tokens},
                 {"temperature", request.temperature}};
    if (!request.stop_markers.empty()) body["stop"] = request.stop_markers;
    const auto raw = exchange("/v1/chat/completions", body.dump());
    json parsed = json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) throw SimError(ErrorCode::MalformedResponse, "completion is not JSON");
    try {
        auto content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        if (content.find_first_not_of(" \t\r\n") == std::string::npos)
            throw SimError(ErrorCode::MalformedResponse, "empty completion");
        return content;
    } catch (const json::exception& e) {
        throw SimError(ErrorCode::MalformedResponse, std::string("completion shape: ") + e.what());
    }
}

EmbeddingVector RemoteBackend::do_embed(std::string_view text) {
    json body = {{"model", config_.embedding_model}, {"input", std::string(text)}};
    const auto raw = exchange("/v1/embeddings", body.dump());
    json parsed = json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) throw SimError(ErrorCode::MalformedResponse, "embedding is not JSON");
    try {
        EmbeddingVector v;
        v.values = parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
        return v;
    } catch (const json::exception& e) {
        throw SimError(ErrorCode::MalformedResponse, std::string("embedding shape: ") + e.what());
    }
}

}  // namespace usersim
