#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

namespace usersim {

class KeyPool;

/// RAII handle on one in-flight slot of a key.
class KeyLease {
public:
    KeyLease() = default;
    KeyLease(KeyPool* pool, std::size_t index) : pool_(pool), index_(index) {}
    KeyLease(const KeyLease&) = delete;
    KeyLease& operator=(const KeyLease&) = delete;
    KeyLease(KeyLease&& other) noexcept { *this = std::move(other); }
    KeyLease& operator=(KeyLease&& other) noexcept;
    ~KeyLease() { release(); }

    std::size_t index() const noexcept { return index_; }
    const std::string& key() const;
    bool valid() const noexcept { return pool_ != nullptr; }
    void release();

private:
    KeyPool* pool_ = nullptr;
    std::size_t index_ = 0;
};

/// Least-loaded credential scheduler: acquire() returns the key with the fewest
/// in-flight requests (lowest index on ties) and blocks while every key is at
/// its per-key cap.
class KeyPool {
public:
    KeyPool(std::vector<std::string> keys, std::size_t max_concurrency_per_key,
            std::chrono::milliseconds wait_timeout = std::chrono::seconds(30));

    KeyLease acquire();
    KeyLease acquire(std::chrono::milliseconds timeout);

    std::size_t size() const noexcept { return keys_.size(); }
    std::size_t max_concurrency_per_key() const noexcept { return cap_; }
    const std::string& key(std::size_t i) const { return keys_.at(i); }
    std::vector<std::size_t> in_flight() const;

private:
    friend class KeyLease;
    void release(std::size_t index);

    std::vector<std::string> keys_;
    std::vector<std::size_t> in_flight_;
    std::size_t cap_;
    std::chrono::milliseconds wait_timeout_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

}  // namespace usersim
