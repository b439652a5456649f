#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "usersim/server/controller.hpp"

namespace usersim {

/// A routed HTTP response before it hits the wire.
struct ApiResponse {
    unsigned status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Splits "a=1&b=x%20y" into decoded pairs.
std::map<std::string, std::string> parse_query(const std::string& query);

/// The JSON API without any transport: method + target (+ body) in, response out.
/// GET  /state, /agents, /agents/{id}, /metrics, /metrics/{name}, /events, /commands/{id}, /branches
/// POST /commands, /branches/{id}/commands
/// Every GET takes ?branch= (default "main"); POSTs take ?wait_ms= to block until applied.
ApiResponse route_api(Controller& controller, const std::string& method, const std::string& target,
                      const std::string& body);

/// HTTP + WebSocket front end on Boost.Beast. WebSocket endpoints:
/// /stream?from_seq=&branch= (event frames) and /roleplay/{agent_id}?branch= (decision prompts).
class HttpServer {
public:
    HttpServer(std::shared_ptr<Controller> controller, std::string host, std::uint16_t port,
               std::string static_dir = {}, std::size_t threads = 4);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts serving on background threads.
    void start();
    /// The bound port (useful when constructed with port 0).
    std::uint16_t port() const noexcept;
    void stop();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace usersim
