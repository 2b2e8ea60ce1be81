#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "handjog/messages.hpp"

namespace handjog {

std::int64_t steady_now_ns();

namespace detail {

class SubscriberQueue {
public:
    SubscriberQueue(std::size_t capacity, std::span<const Topic> topics);

    bool wants(Topic t) const { return wanted_[static_cast<std::size_t>(t)]; }
    void push(const Envelope& env);
    std::optional<Envelope> try_pop();
    std::optional<Envelope> pop_for(std::chrono::nanoseconds timeout);
    void close();

    struct Counters {
        std::uint64_t enqueued = 0;
        std::uint64_t dropped = 0;
        std::uint64_t popped = 0;
    };
    Counters counters(Topic t) const;
    std::size_t pending() const;

private:
    const std::size_t capacity_;
    std::array<bool, kTopicCount> wanted_{};
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Envelope> queue_;
    std::array<Counters, kTopicCount> counters_{};
    bool closed_ = false;
};

}  // namespace detail

/// Ordered handle over one or more topics. Holds messages published after
/// it was created, in a bounded queue that drops the oldest on overflow.
class Subscription {
public:
    Subscription() = default;
    explicit Subscription(std::shared_ptr<detail::SubscriberQueue> queue) : queue_(std::move(queue)) {}

    std::optional<Envelope> try_pop() { return queue_->try_pop(); }
    std::optional<Envelope> pop_for(std::chrono::nanoseconds timeout) { return queue_->pop_for(timeout); }

    std::uint64_t delivered(Topic t) const { return queue_->counters(t).popped; }
    std::uint64_t dropped(Topic t) const { return queue_->counters(t).dropped; }
    std::uint64_t enqueued(Topic t) const { return queue_->counters(t).enqueued; }
    std::size_t pending() const { return queue_->pending(); }
    bool valid() const { return static_cast<bool>(queue_); }

private:
    std::shared_ptr<detail::SubscriberQueue> queue_;
};

/// In-process publish/subscribe bus. publish() is safe from any number of
/// threads; each Subscription must be drained by a single consumer.
class Bus {
public:
    static constexpr std::size_t kDefaultQueueCapacity = 64;

    explicit Bus(std::size_t queue_capacity = kDefaultQueueCapacity);

    /// Fans the payload out to current subscribers of `topic` and returns
    /// its per-topic sequence number (starting at 1). Throws
    /// ValidationError if the payload does not match the topic schema.
    std::uint64_t publish(Topic topic, Payload payload, std::int64_t stamp_ms);

    Subscription subscribe(Topic topic);
    Subscription subscribe(std::initializer_list<Topic> topics);
    /// Throws ValidationError for a name that is not a known topic.
    Subscription subscribe(std::string_view topic_name);

    std::uint64_t published(Topic topic) const;

    /// Wakes every blocked consumer; later publishes are still accepted.
    void close();

    std::size_t queue_capacity() const { return capacity_; }

private:
    struct TopicState {
        mutable std::mutex mu;
        std::uint64_t seq = 0;
        std::vector<std::weak_ptr<detail::SubscriberQueue>> subscribers;
    };

    Subscription subscribe_many(std::span<const Topic> topics);

    std::size_t capacity_;
    std::array<TopicState, kTopicCount> topics_;
    std::mutex subs_mu_;
    std::vector<std::weak_ptr<detail::SubscriberQueue>> all_;
};

}  // namespace handjog
