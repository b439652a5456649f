#include "usersim/engine/role_play.hpp"

#include "usersim/core/text.hpp"

namespace usersim {

std::optional<std::string> RolePlaySession::ask(const DecisionRequest& request) {
    Listener listener;
    std::uint64_t ticket;
    {
        std::lock_guard lock(mu_);
        if (!connected_) return std::nullopt;
        pending_ = request;
        answer_.reset();
        ticket = ++ticket_;
        listener = listener_;
    }
    if (listener) listener(request);
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout_, [&] { return answer_.has_value() || !connected_ || ticket_ != ticket; });
    pending_.reset();
    auto out = std::move(answer_);
    answer_.reset();
    return out;
}

std::optional<DecisionRequest> RolePlaySession::pending() const {
    std::lock_guard lock(mu_);
    if (answer_) return std::nullopt;
    return pending_;
}

bool RolePlaySession::submit(std::string answer) {
    {
        std::lock_guard lock(mu_);
        if (!pending_ || answer_) return false;
        answer_ = std::move(answer);
    }
    cv_.notify_all();
    return true;
}

void RolePlaySession::disconnect() {
    {
        std::lock_guard lock(mu_);
        connected_ = false;
    }
    cv_.notify_all();
}

bool RolePlaySession::connected() const {
    std::lock_guard lock(mu_);
    return connected_;
}

void RolePlaySession::set_listener(Listener listener) {
    std::optional<DecisionRequest> pending;
    {
        std::lock_guard lock(mu_);
        listener_ = listener;
        if (!answer_) pending = pending_;
    }
    if (listener && pending) listener(*pending);
}

std::optional<std::string> RoutingChannel::decide(const DecisionRequest& request) {
    if (!session_ || !session_->connected()) return fallback_.decide(request);
    auto answer = session_->ask(request);
    if (!answer) return answer;
    if (request.kind == DecisionKind::Dialogue) {
        const auto t = text::trim(*answer);
        if (!t.empty() && t.front() != '[') return "[" + name_ + "]: " + t;
    }
    return answer;
}

}  // namespace usersim
