#include "handjog/bus.hpp"

#include <algorithm>

#include "handjog/error.hpp"

namespace handjog {

std::int64_t steady_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string_view topic_name(Topic t) {
    switch (t) {
        case Topic::landmarks: return "perception/landmarks";
        case Topic::gesture: return "perception/gesture";
        case Topic::jog: return "controller/jog";
        case Topic::state: return "robot/state";
        case Topic::safety: return "safety/events";
    }
    return "";
}

std::optional<Topic> parse_topic(std::string_view name) {
    for (std::size_t i = 0; i < kTopicCount; ++i) {
        const auto t = static_cast<Topic>(i);
        if (topic_name(t) == name) return t;
    }
    return std::nullopt;
}

Topic schema_topic(const Payload& payload) { return static_cast<Topic>(payload.index()); }

namespace detail {

SubscriberQueue::SubscriberQueue(std::size_t capacity, std::span<const Topic> topics) : capacity_(capacity) {
    for (Topic t : topics) wanted_[static_cast<std::size_t>(t)] = true;
}

void SubscriberQueue::push(const Envelope& env) {
    {
        std::lock_guard lock(mu_);
        if (queue_.size() >= capacity_) {
            ++counters_[static_cast<std::size_t>(queue_.front().topic)].dropped;
            queue_.pop_front();
        }
        queue_.push_back(env);
        ++counters_[static_cast<std::size_t>(env.topic)].enqueued;
    }
    cv_.notify_one();
}

std::optional<Envelope> SubscriberQueue::try_pop() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    ++counters_[static_cast<std::size_t>(env.topic)].popped;
    return env;
}

std::optional<Envelope> SubscriberQueue::pop_for(std::chrono::nanoseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    ++counters_[static_cast<std::size_t>(env.topic)].popped;
    return env;
}

void SubscriberQueue::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

SubscriberQueue::Counters SubscriberQueue::counters(Topic t) const {
    std::lock_guard lock(mu_);
    return counters_[static_cast<std::size_t>(t)];
}

std::size_t SubscriberQueue::pending() const {
    std::lock_guard lock(mu_);
    return queue_.size();
}

}  // namespace detail

Bus::Bus(std::size_t queue_capacity) : capacity_(queue_capacity) {
    if (capacity_ == 0) throw ValidationError("bus queue capacity must be >= 1");
}

std::uint64_t Bus::publish(Topic topic, Payload payload, std::int64_t stamp_ms) {
    if (schema_topic(payload) != topic) {
        throw ValidationError("payload schema does not match topic " + std::string(topic_name(topic)));
    }
    TopicState& ts = topics_[static_cast<std::size_t>(topic)];
    Envelope env{topic, 0, stamp_ms, steady_now_ns(), std::move(payload)};
    // The topic lock is held through fan-out so concurrent publishers
    // cannot interleave and every subscriber sees seq order.
    std::lock_guard lock(ts.mu);
    env.seq = ++ts.seq;
    auto& subs = ts.subscribers;
    subs.erase(std::remove_if(subs.begin(), subs.end(), [](const auto& w) { return w.expired(); }), subs.end());
    for (const auto& weak : subs) {
        if (auto q = weak.lock()) q->push(env);
    }
    return env.seq;
}

Subscription Bus::subscribe_many(std::span<const Topic> topics) {
    auto queue = std::make_shared<detail::SubscriberQueue>(capacity_, topics);
    for (Topic t : topics) {
        TopicState& ts = topics_[static_cast<std::size_t>(t)];
        std::lock_guard lock(ts.mu);
        ts.subscribers.push_back(queue);
    }
    {
        std::lock_guard lock(subs_mu_);
        all_.push_back(queue);
    }
    return Subscription(std::move(queue));
}

Subscription Bus::subscribe(Topic topic) {
    const Topic one[] = {topic};
    return subscribe_many(one);
}

Subscription Bus::subscribe(std::initializer_list<Topic> topics) {
    return subscribe_many(std::span<const Topic>(topics.begin(), topics.size()));
}

Subscription Bus::subscribe(std::string_view name) {
    const auto t = parse_topic(name);
    if (!t) throw ValidationError("unknown topic '" + std::string(name) + "'");
    return subscribe(*t);
}

std::uint64_t Bus::published(Topic topic) const {
    const TopicState& ts = topics_[static_cast<std::size_t>(topic)];
    std::lock_guard lock(ts.mu);
    return ts.seq;
}

void Bus::close() {
    std::lock_guard lock(subs_mu_);
    for (const auto& weak : all_) {
        if (auto q = weak.lock()) q->close();
    }
}

}  // namespace handjog
