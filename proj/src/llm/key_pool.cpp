#include "usersim/llm/key_pool.hpp"

#include "usersim/core/error.hpp"

namespace usersim {

KeyLease& KeyLease::operator=(KeyLease&& other) noexcept {
    if (this != &other) {
        release();
        pool_ = other.pool_;
        index_ = other.index_;
        other.pool_ = nullptr;
    }
    return *this;
}

const std::string& KeyLease::key() const { return pool_->key(index_); }

void KeyLease::release() {
    if (pool_) {
        pool_->release(index_);
        pool_ = nullptr;
    }
}

KeyPool::KeyPool(std::vector<std::string> keys, std::size_t max_concurrency_per_key,
                 std::chrono::milliseconds wait_timeout)
    : keys_(std::move(keys)), in_flight_(keys_.size(), 0), cap_(max_concurrency_per_key),
      wait_timeout_(wait_timeout) {
    if (keys_.empty()) throw SimError(ErrorCode::InvalidInput, "key pool needs at least one key");
    if (cap_ == 0) throw SimError(ErrorCode::InvalidInput, "max_concurrency_per_key must be positive");
}

KeyLease KeyPool::acquire() { return acquire(wait_timeout_); }

KeyLease KeyPool::acquire(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    auto pick = [&]() -> std::ptrdiff_t {
        std::ptrdiff_t best = -1;
        for (std::size_t i = 0; i < in_flight_.size(); ++i) {
            if (in_flight_[i] >= cap_) continue;
            if (best < 0 || in_flight_[i] < in_flight_[static_cast<std::size_t>(best)])
                best = static_cast<std::ptrdiff_t>(i);
        }
        return best;
    };
    std::ptrdiff_t chosen = pick();
    if (chosen < 0) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while ((chosen = pick()) < 0) {
            if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
                chosen = pick();
                if (chosen < 0) throw SimError(ErrorCode::PoolExhausted, "all API keys saturated");
                break;
            }
        }
    }
    ++in_flight_[static_cast<std::size_t>(chosen)];
    return KeyLease(this, static_cast<std::size_t>(chosen));
}

std::vector<std::size_t> KeyPool::in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
}

void KeyPool::release(std::size_t index) {
    {
        std::lock_guard lock(mu_);
        if (in_flight_[index] > 0) --in_flight_[index];
    }
    cv_.notify_one();
}

}  // namespace usersim
