#include "usersim/server/http_server.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "usersim/core/error.hpp"

namespace usersim {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

// ---- routing ----

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string url_decode(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out += ' ';
        } else if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
            out += static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2]));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
        if (c == '/') {
            if (!cur.empty()) parts.push_back(url_decode(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(url_decode(cur));
    return parts;
}

std::pair<std::string, std::string> split_target(const std::string& target) {
    const auto q = target.find('?');
    if (q == std::string::npos) return {target, {}};
    return {target.substr(0, q), target.substr(q + 1)};
}

ApiResponse json_response(unsigned status, const json& body) { return {status, "application/json", body.dump()}; }

ApiResponse error_response(unsigned status, const std::string& code, const std::string& message) {
    return json_response(status, {{"error", code}, {"message", message}});
}

unsigned status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput:
        case ErrorCode::InvalidPatch:
        case ErrorCode::ConfigInvalid: return 400;
        case ErrorCode::PreconditionViolation: return 409;
        default: return 500;
    }
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

ApiResponse post_command(Controller& c, const std::string& branch, const std::string& body,
                         const std::map<std::string, std::string>& query) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        return json_response(400, {{"error", "schema"}, {"fields", {{{"field", ""}, {"message", e.what()}}}}});
    }
    try {
        auto rec = c.submit_json(branch, j);
        if (auto it = query.find("wait_ms"); it != query.end()) {
            const auto ms = std::min<std::uint64_t>(parse_u64(it->second).value_or(0), 120000);
            if (auto done = c.wait(rec.id, std::chrono::milliseconds(ms))) rec = *done;
        }
        const bool finished = rec.status == CommandStatus::Applied || rec.status == CommandStatus::Rejected;
        return json_response(finished ? 200 : 202, rec.to_json());
    } catch (const CommandSchemaError& e) {
        return json_response(400, e.to_json());
    } catch (const SimError& e) {
        return error_response(e.code() == ErrorCode::InvalidInput ? 404 : status_for(e.code()), to_string(e.code()),
                              e.what());
    }
}

}  // namespace

std::map<std::string, std::string> parse_query(const std::string& query) {
    std::map<std::string, std::string> out;
    std::istringstream in(query);
    std::string pair;
    while (std::getline(in, pair, '&')) {
        if (pair.empty()) continue;
        const auto eq = pair.find('=');
        if (eq == std::string::npos)
            out[url_decode(pair)] = "";
        else
            out[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
    }
    return out;
}

ApiResponse route_api(Controller& c, const std::string& method, const std::string& target, const std::string& body) {
    const auto [path, qs] = split_target(target);
    const auto query = parse_query(qs);
    const auto parts = split_path(path);
    const std::string branch = query.count("branch") ? query.at("branch") : "main";
    try {
        if (method == "POST") {
            if (parts == std::vector<std::string>{"commands"}) return post_command(c, "main", body, query);
            if (parts.size() == 3 && parts[0] == "branches" && parts[2] == "commands") {
                if (!c.has_branch(parts[1])) return error_response(404, "InvalidInput", "unknown branch " + parts[1]);
                return post_command(c, parts[1], body, query);
            }
            return error_response(404, "NotFound", "no route for POST " + path);
        }
        if (method != "GET") return error_response(405, "MethodNotAllowed", method + " is not supported");
        if (!parts.empty() && parts[0] != "commands" && parts[0] != "branches" && !c.has_branch(branch))
            return error_response(404, "InvalidInput", "unknown branch " + branch);
        if (parts == std::vector<std::string>{"state"}) return json_response(200, c.state(branch));
        if (parts == std::vector<std::string>{"agents"}) return json_response(200, c.agents(branch));
        if (parts.size() == 2 && parts[0] == "agents") {
            const auto id = parse_u64(parts[1]);
            if (!id) return error_response(400, "InvalidInput", "agent id must be an integer");
            try {
                return json_response(200, c.agent(branch, static_cast<std::uint32_t>(*id)));
            } catch (const SimError& e) {
                return error_response(404, "InvalidInput", e.what());
            }
        }
        if (parts == std::vector<std::string>{"metrics"}) return json_response(200, Engine::metric_names());
        if (parts.size() == 2 && parts[0] == "metrics") {
            if (auto m = c.metric(branch, parts[1])) return json_response(200, *m);
            return json_response(404, {{"error", "InvalidInput"},
                                       {"message", "unknown metric " + parts[1]},
                                       {"metrics", Engine::metric_names()}});
        }
        if (parts == std::vector<std::string>{"events"}) {
            const auto from = query.count("from_seq") ? parse_u64(query.at("from_seq")).value_or(0) : 0;
            std::string out = "[";
            bool first = true;
            for (const auto& f : c.bus(branch).frames(from)) {
                if (!first) out += ',';
                out += f;
                first = false;
            }
            return {200, "application/json", out + "]"};
        }
        if (parts.size() == 2 && parts[0] == "commands") {
            if (auto rec = c.command(parts[1])) return json_response(200, rec->to_json());
            return error_response(404, "InvalidInput", "unknown command " + parts[1]);
        }
        if (parts == std::vector<std::string>{"branches"}) return json_response(200, c.branches_json());
        return error_response(404, "NotFound", "no route for GET " + path);
    } catch (const SimError& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "Internal", e.what());
    }
}

// ---- transport ----

namespace {

std::string mime_type(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    return "application/octet-stream";
}

std::optional<ApiResponse> serve_static(const std::string& root, const std::string& path) {
    if (root.empty()) return std::nullopt;
    std::string rel = path == "/" ? "index.html" : path.substr(1);
    if (rel.find("..") != std::string::npos) return std::nullopt;
    const auto file = std::filesystem::path(root) / rel;
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return ApiResponse{200, mime_type(file.string()), buf.str()};
}

/// Serialized text frames over one WebSocket, written from its strand.
class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    explicit WsConnection(tcp::socket&& socket) : ws_(std::move(socket)) {}
    virtual ~WsConnection() = default;

    void accept(http::request<http::string_body> req) {
        req_ = std::move(req);
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req_, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
    }

    /// Thread-safe: queues a frame for sending.
    void send(std::string text) {
        net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
            self->outbox_.push_back(std::move(text));
            if (self->outbox_.size() == 1) self->write_next();
        });
    }

    void close() {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closed_) return;
            self->closed_ = true;
            self->ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
        });
    }

protected:
    virtual void opened() = 0;
    virtual void received(const std::string& text) = 0;
    virtual void closing() {}

    http::request<http::string_body> req_;

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        opened();
        read_next();
    }

    void read_next() {
        ws_.async_read(in_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            closing();
            return;
        }
        const auto text = beast::buffers_to_string(in_.data());
        in_.consume(in_.size());
        received(text);
        read_next();
    }

    void write_next() {
        if (closed_) {
            outbox_.clear();
            return;
        }
        ws_.text(true);
        ws_.async_write(net::buffer(outbox_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            if (ec) {
                                self->outbox_.clear();
                                return;
                            }
                            self->outbox_.pop_front();
                            if (!self->outbox_.empty()) self->write_next();
                        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer in_;
    std::deque<std::string> outbox_;
    bool closed_ = false;
};

/// /stream: replay from the requested offset, then the live tail.
class StreamConnection final : public WsConnection {
public:
    StreamConnection(tcp::socket&& socket, std::shared_ptr<Controller> controller, std::string branch,
                     std::uint64_t from_seq)
        : WsConnection(std::move(socket)), controller_(std::move(controller)), branch_(std::move(branch)),
          from_seq_(from_seq) {}

    ~StreamConnection() override {
        if (token_) controller_->bus(branch_).unsubscribe(token_);
    }

protected:
    void opened() override {
        std::weak_ptr<WsConnection> weak = shared_from_this();
        token_ = controller_->bus(branch_).subscribe(from_seq_, [weak](std::uint64_t, const std::string& frame) {
            if (auto self = weak.lock()) self->send(frame);
        });
    }

    void received(const std::string& text) override {
        // clients may ping; anything else is ignored
        try {
            auto j = json::parse(text);
            if (j.value("type", "") == "ping") send(json{{"type", "pong"}}.dump());
        } catch (const json::exception&) {
        }
    }

    void closing() override {
        if (token_) controller_->bus(branch_).unsubscribe(token_);
        token_ = 0;
    }

private:
    std::shared_ptr<Controller> controller_;
    std::string branch_;
    std::uint64_t from_seq_;
    std::uint64_t token_ = 0;
};

json decision_json(const DecisionRequest& r, std::chrono::milliseconds timeout) {
    return {{"type", "decision"},
            {"agent", r.agent.value},
            {"kind", to_string(r.kind)},
            {"prompt", r.prompt},
            {"context", r.context},
            {"attempt", r.attempt},
            {"timeout_ms", timeout.count()}};
}

/// /roleplay/{agent}: attaches a session (between rounds), forwards each decision
/// request to the client and each client reply as a role_play_input command.
class RolePlayConnection final : public WsConnection {
public:
    RolePlayConnection(tcp::socket&& socket, std::shared_ptr<Controller> controller, std::string branch,
                       std::uint32_t agent)
        : WsConnection(std::move(socket)), controller_(std::move(controller)), branch_(std::move(branch)),
          agent_(agent) {}

    ~RolePlayConnection() override { release(); }

protected:
    void opened() override {
        std::weak_ptr<WsConnection> weak = shared_from_this();
        // attaching waits for a round boundary, so it runs off the I/O threads
        std::thread([weak, controller = controller_, branch = branch_, agent = agent_] {
            json reply;
            std::shared_ptr<RolePlaySession> session;
            try {
                auto rec = controller->submit(branch, "attach_role_play", {{"agent", agent}});
                auto done = controller->wait(rec.id, std::chrono::minutes(10));
                if (done && done->status == CommandStatus::Applied) {
                    session = controller->role_play_session(branch, agent);
                    reply = {{"type", "attached"}, {"agent", agent}, {"command", done->to_json()}};
                } else {
                    reply = {{"type", "error"},
                             {"message", "attach failed"},
                             {"command", done ? done->to_json() : json(nullptr)}};
                }
            } catch (const CommandSchemaError& e) {
                reply = {{"type", "error"}, {"message", e.what()}, {"detail", e.to_json()}};
            } catch (const std::exception& e) {
                reply = {{"type", "error"}, {"message", e.what()}};
            }
            auto self = std::static_pointer_cast<RolePlayConnection>(weak.lock());
            if (!self) {
                if (session) session->disconnect();
                return;
            }
            self->send(reply.dump());
            if (!session) {
                self->close();
                return;
            }
            {
                std::lock_guard lock(self->mu_);
                self->session_ = session;
            }
            const auto timeout = session->timeout();
            session->set_listener([weak, timeout](const DecisionRequest& r) {
                if (auto s = weak.lock()) s->send(decision_json(r, timeout).dump());
            });
        }).detach();
    }

    void received(const std::string& text) override {
        std::string input = text;
        std::optional<std::string> key;
        try {
            auto j = json::parse(text);
            if (j.is_object()) {
                input = j.value("input", "");
                if (j.contains("idempotency_key") && j["idempotency_key"].is_string())
                    key = j["idempotency_key"].get<std::string>();
            }
        } catch (const json::exception&) {
            // a bare line is taken as the answer itself
        }
        try {
            auto rec = controller_->submit(branch_, "role_play_input", {{"agent", agent_}, {"input", input}}, key);
            send(json{{"type", "ack"}, {"command", rec.to_json()}}.dump());
        } catch (const CommandSchemaError& e) {
            send(json{{"type", "error"}, {"message", e.what()}, {"detail", e.to_json()}}.dump());
        } catch (const std::exception& e) {
            send(json{{"type", "error"}, {"message", e.what()}}.dump());
        }
    }

    void closing() override { release(); }

private:
    void release() {
        std::shared_ptr<RolePlaySession> s;
        {
            std::lock_guard lock(mu_);
            s = std::move(session_);
        }
        if (s) {
            s->set_listener(nullptr);
            s->disconnect();
        }
    }

    std::shared_ptr<Controller> controller_;
    std::string branch_;
    std::uint32_t agent_;
    std::mutex mu_;
    std::shared_ptr<RolePlaySession> session_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket&& socket, HttpServer::Impl& server) : stream_(std::move(socket)), server_(server) {}
    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::read, shared_from_this()));
    }

private:
    void read();
    void on_read(beast::error_code ec, std::size_t);
    void on_write(bool keep_alive, beast::error_code ec, std::size_t);

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    std::shared_ptr<http::response<http::string_body>> res_;
    HttpServer::Impl& server_;
};

}  // namespace

struct HttpServer::Impl {
    std::shared_ptr<Controller> controller;
    std::string host;
    std::uint16_t requested_port;
    std::string static_dir;
    std::size_t threads;
    net::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::vector<std::thread> pool;
    std::atomic<std::uint16_t> bound_port{0};
    bool running = false;

    Impl(std::shared_ptr<Controller> c, std::string h, std::uint16_t p, std::string s, std::size_t t)
        : controller(std::move(c)), host(std::move(h)), requested_port(p), static_dir(std::move(s)),
          threads(std::max<std::size_t>(1, t)), ioc(static_cast<int>(threads)) {}

    void accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // acceptor closed
            std::make_shared<HttpConnection>(std::move(socket), *this)->run();
            accept();
        });
    }

    http::response<http::string_body> handle(const http::request<http::string_body>& req) {
        const std::string target(req.target());
        const std::string method(req.method_string());
        ApiResponse r;
        if (req.method() == http::verb::options) {
            r = {204, "text/plain", ""};
        } else {
            const auto path = split_target(target).first;
            const auto first = split_path(path);
            static const std::vector<std::string> api = {"state", "agents", "metrics", "events", "commands",
                                                         "branches"};
            const bool is_api = !first.empty() && std::find(api.begin(), api.end(), first[0]) != api.end();
            std::optional<ApiResponse> file;
            if (!is_api && req.method() == http::verb::get) file = serve_static(static_dir, path);
            r = file ? *file : route_api(*controller, method, target, req.body());
        }
        http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
        res.set(http::field::server, "usersim");
        res.set(http::field::content_type, r.content_type);
        res.set(http::field::access_control_allow_origin, "*");
        res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
        res.keep_alive(req.keep_alive());
        res.body() = std::move(r.body);
        res.prepare_payload();
        return res;
    }

    /// Hands a WebSocket upgrade to the matching endpoint; false when none matches.
    bool upgrade(tcp::socket&& socket, http::request<http::string_body>&& req) {
        const auto [path, qs] = split_target(std::string(req.target()));
        const auto query = parse_query(qs);
        const auto parts = split_path(path);
        const std::string branch = query.count("branch") ? query.at("branch") : "main";
        if (!controller->has_branch(branch)) return false;
        if (parts == std::vector<std::string>{"stream"}) {
            const auto from = query.count("from_seq") ? parse_u64(query.at("from_seq")).value_or(0) : 0;
            std::make_shared<StreamConnection>(std::move(socket), controller, branch, from)->accept(std::move(req));
            return true;
        }
        if (parts.size() == 2 && parts[0] == "roleplay") {
            const auto agent = parse_u64(parts[1]);
            if (!agent) return false;
            std::make_shared<RolePlayConnection>(std::move(socket), controller, branch,
                                                 static_cast<std::uint32_t>(*agent))
                ->accept(std::move(req));
            return true;
        }
        return false;
    }
};

namespace {

void HttpConnection::read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(120));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
}

void HttpConnection::on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
        stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
    }
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
        stream_.expires_never();
        auto req = req_;
        if (server_.upgrade(stream_.release_socket(), std::move(req))) return;
        return;  // unknown endpoint: the socket is dropped
    }
    res_ = std::make_shared<http::response<http::string_body>>(server_.handle(req_));
    http::async_write(stream_, *res_,
                      beast::bind_front_handler(&HttpConnection::on_write, shared_from_this(), res_->keep_alive()));
}

void HttpConnection::on_write(bool keep_alive, beast::error_code ec, std::size_t) {
    if (ec) return;
    if (!keep_alive) {
        stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
    }
    res_.reset();
    read();
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<Controller> controller, std::string host, std::uint16_t port,
                       std::string static_dir, std::size_t threads)
    : impl_(std::make_unique<Impl>(std::move(controller), std::move(host), port, std::move(static_dir), threads)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
    auto& i = *impl_;
    if (i.running) return;
    const tcp::endpoint ep{net::ip::make_address(i.host), i.requested_port};
    i.acceptor.open(ep.protocol());
    i.acceptor.set_option(net::socket_base::reuse_address(true));
    i.acceptor.bind(ep);
    i.acceptor.listen(net::socket_base::max_listen_connections);
    i.bound_port = i.acceptor.local_endpoint().port();
    i.running = true;
    i.accept();
    for (std::size_t t = 0; t < i.threads; ++t) i.pool.emplace_back([&i] { i.ioc.run(); });
}

std::uint16_t HttpServer::port() const noexcept { return impl_->bound_port; }

void HttpServer::stop() {
    auto& i = *impl_;
    if (!i.running) return;
    i.running = false;
    net::post(i.ioc, [&i] {
        beast::error_code ec;
        i.acceptor.close(ec);
    });
    i.ioc.stop();
    for (auto& t : i.pool)
        if (t.joinable()) t.join();
    i.pool.clear();
}

}  // namespace usersim
