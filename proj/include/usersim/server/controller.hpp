#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "usersim/engine/engine.hpp"

namespace usersim {

/// Append-only mirror of one branch's event log, with live subscribers.
/// A subscriber receives every frame from its offset onwards exactly once, in order.
class EventBus {
public:
    /// Called with each frame's compact JSON (`{"seq":..,"event":{..}}`).
    using Sink = std::function<void(std::uint64_t seq, const std::string& frame)>;

    void publish(const Event& e);
    /// Replays frames with seq >= from_seq into `sink`, then keeps it subscribed.
    /// Both happen under one lock, so nothing is skipped or repeated.
    std::uint64_t subscribe(std::uint64_t from_seq, Sink sink);
    void unsubscribe(std::uint64_t token);

    std::vector<std::string> frames(std::uint64_t from_seq = 0) const;
    std::uint64_t next_seq() const;

    static std::string frame_of(const Event& e);

private:
    mutable std::mutex mu_;
    std::uint64_t base_seq_ = 0;  // seq of frames_[0]
    std::vector<std::string> frames_;
    std::map<std::uint64_t, Sink> sinks_;
    std::uint64_t next_token_ = 1;
};

enum class CommandStatus { Queued, Running, Applied, Rejected };
const char* to_string(CommandStatus s);

/// Field-level schema complaints for a rejected submission.
struct FieldError {
    std::string field;
    std::string message;
};

class CommandSchemaError : public std::runtime_error {
public:
    explicit CommandSchemaError(std::vector<FieldError> errors);
    const std::vector<FieldError>& errors() const noexcept { return errors_; }
    nlohmann::json to_json() const;

private:
    std::vector<FieldError> errors_;
};

struct CommandRecord {
    std::string id;
    std::string branch;
    std::string kind;
    nlohmann::json payload = nlohmann::json::object();
    std::optional<std::string> idempotency_key;
    CommandStatus status = CommandStatus::Queued;
    nlohmann::json result = nlohmann::json::object();
    std::optional<nlohmann::json> error;  // {code, message}
    std::uint64_t round_applied = 0;

    nlohmann::json to_json() const;
};

/// Command kinds accepted by submit().
const std::vector<std::string>& command_kinds();

/// Owns the engines (one per branch) and the only thread that mutates them.
/// Commands are queued per branch and applied between rounds in FIFO order;
/// readers see snapshots taken at round and command boundaries.
class Controller {
public:
    explicit Controller(std::unique_ptr<Engine> engine);
    ~Controller();
    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    /// Validates and queues a command. A repeated idempotency key returns the
    /// first submission's record without queueing anything.
    /// Throws CommandSchemaError on bad input and SimError(InvalidInput) for an unknown branch.
    CommandRecord submit(const std::string& branch, const std::string& kind, nlohmann::json payload,
                         std::optional<std::string> idempotency_key = std::nullopt);
    /// Parses `{"kind":..,"payload":{..},"idempotency_key":..}`.
    CommandRecord submit_json(const std::string& branch, const nlohmann::json& body);

    std::optional<CommandRecord> command(const std::string& id) const;
    /// Blocks until the command is applied or rejected, or the timeout passes.
    std::optional<CommandRecord> wait(const std::string& id, std::chrono::milliseconds timeout) const;
    /// Blocks until every branch has an empty queue and no pending rounds.
    bool wait_idle(std::chrono::milliseconds timeout) const;

    std::vector<std::string> branch_ids() const;
    bool has_branch(const std::string& branch) const;
    nlohmann::json branches_json() const;

    // Snapshot reads. Unknown branch or agent throws SimError(InvalidInput).
    nlohmann::json state(const std::string& branch) const;
    nlohmann::json agents(const std::string& branch) const;
    nlohmann::json agent(const std::string& branch, std::uint32_t id) const;
    /// Empty optional for an unknown metric name.
    std::optional<nlohmann::json> metric(const std::string& branch, const std::string& name) const;

    EventBus& bus(const std::string& branch);

    /// The session created by attach_role_play, if any.
    std::shared_ptr<RolePlaySession> role_play_session(const std::string& branch, std::uint32_t agent) const;

    void stop();

private:
    struct Branch;
    struct Snapshot;

    Branch& branch_locked(const std::string& id) const;
    void worker();
    bool step_branch(Branch& b);
    void apply(Branch& b, CommandRecord& rec);
    static std::shared_ptr<const Snapshot> build_snapshot(const Branch& b);
    void refresh_snapshot(Branch& b);
    std::string add_branch(std::unique_ptr<Engine> engine, std::string parent, std::uint64_t fork_round);
    void validate(const Branch& b, const std::string& kind, const nlohmann::json& payload) const;
    void finish(const std::string& id, CommandStatus status, nlohmann::json result,
                std::optional<nlohmann::json> error, std::uint64_t round);

    mutable std::mutex mu_;
    mutable std::condition_variable cv_;  // signals new work and command completions
    std::map<std::string, std::unique_ptr<Branch>> branches_;
    std::map<std::string, CommandRecord> commands_;
    std::map<std::string, std::string> by_key_;  // idempotency key -> command id
    std::uint64_t next_command_ = 1;
    std::uint64_t next_branch_ = 1;
    bool stopping_ = false;
    std::thread worker_;
};

}  // namespace usersim
