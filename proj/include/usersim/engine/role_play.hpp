#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <string>

#include "usersim/agent/agent.hpp"

namespace usersim {

/// Mailbox between the engine (asking, on its worker thread) and a human
/// (answering, from any thread). One decision is outstanding at a time.
class RolePlaySession {
public:
    using Listener = std::function<void(const DecisionRequest&)>;

    RolePlaySession(AgentId agent, std::chrono::milliseconds timeout) : agent_(agent), timeout_(timeout) {}

    AgentId agent() const noexcept { return agent_; }
    std::chrono::milliseconds timeout() const noexcept { return timeout_; }

    /// Publishes the request and waits for submit(), a timeout or a disconnect.
    std::optional<std::string> ask(const DecisionRequest& request);

    /// The request still awaiting an answer, if any.
    std::optional<DecisionRequest> pending() const;
    /// Delivers an answer to the outstanding request. False when nothing is pending.
    bool submit(std::string answer);

    void disconnect();
    bool connected() const;

    /// Called (outside the lock) whenever a new request is published. A request
    /// already pending is handed to the new listener straight away, so a client
    /// that connects late sees each request exactly once.
    void set_listener(Listener listener);

private:
    AgentId agent_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::optional<DecisionRequest> pending_;
    std::optional<std::string> answer_;
    std::uint64_t ticket_ = 0;
    bool connected_ = true;
    Listener listener_;
};

/// Sends decisions to a connected session, otherwise to `fallback`. Plain
/// dialogue lines without a speaker tag are attributed to the session's agent.
class RoutingChannel final : public DecisionChannel {
public:
    RoutingChannel(DecisionChannel& fallback, RolePlaySession* session, std::string agent_name)
        : fallback_(fallback), session_(session), name_(std::move(agent_name)) {}
    std::optional<std::string> decide(const DecisionRequest& request) override;

private:
    DecisionChannel& fallback_;
    RolePlaySession* session_;
    std::string name_;
};

}  // namespace usersim
