#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "handjog/bus.hpp"
#include "handjog/compress.hpp"
#include "handjog/controller.hpp"
#include "handjog/latency.hpp"
#include "handjog/tinynet.hpp"
#include "handjog/ur5.hpp"

namespace handjog {

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
};

/// Milliseconds since construction, from the steady clock.
class SteadyClock final : public Clock {
public:
    SteadyClock() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t now_ms() const override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// Manually advanced time for deterministic runs.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
    std::int64_t now_ms() const override { return now_.load(); }
    void set(std::int64_t ms) { now_.store(ms); }
    void advance(std::int64_t ms) { now_.fetch_add(ms); }

private:
    std::atomic<std::int64_t> now_;
};

/// Float or quantized gesture model behind one interface.
class Classifier {
public:
    explicit Classifier(MlpParams params) : model_(std::move(params)) {}
    explicit Classifier(QuantizedModel model) : model_(std::move(model)) {}

    GestureEvent classify(std::span<const double> features) const;
    bool quantized() const { return std::holds_alternative<QuantizedModel>(model_); }

private:
    std::variant<MlpParams, QuantizedModel> model_;
};

enum class ModelKind { float_model, quantized_model };

/// Reads the 4-byte magic. Throws ValidationError for anything else.
ModelKind model_kind(const std::filesystem::path& path);
std::shared_ptr<const Classifier> load_classifier(const std::filesystem::path& path);

struct PipelineConfig {
    ControllerConfig controller;
    SimConfig sim;
    NormalizeOptions normalize;
    double payload_kg = 0.0;
    Joints initial_q = home_joints();
    std::size_t queue_capacity = Bus::kDefaultQueueCapacity;
    std::int64_t controller_tick_ms = 10;
    /// The sim treats the last jog as stale (zero velocity) after this.
    std::int64_t command_timeout_ms = 200;

    void validate() const;
};

/// Landmark frames in, gesture events out.
class PerceptionNode {
public:
    PerceptionNode(Bus& bus, std::shared_ptr<const Classifier> classifier, NormalizeOptions normalize,
                   LatencyTracker* latency = nullptr);

    /// Classifies every pending frame; returns how many were handled.
    std::size_t poll();
    /// Waits up to `timeout` for a frame, then drains the queue.
    std::size_t wait_and_poll(std::chrono::nanoseconds timeout);

    /// Button mode: publishes a confidence-1 event without classifying.
    void inject_hold(int label, std::int64_t t_ms);

    std::uint64_t rejected_frames() const { return rejected_; }

private:
    void handle(const Envelope& env);

    Bus& bus_;
    Subscription frames_;
    std::shared_ptr<const Classifier> classifier_;
    NormalizeOptions normalize_;
    LatencyTracker* latency_;
    std::uint64_t rejected_ = 0;
};

/// Gesture events in, jog commands out.
class ControllerNode {
public:
    ControllerNode(Bus& bus, ControllerConfig config, const Clock& clock, LatencyTracker* latency = nullptr);

    /// Feeds every pending gesture to the state machine; with none pending,
    /// runs one no-gesture tick.
    void tick();
    void wait_and_tick(std::chrono::nanoseconds timeout);

    const ControllerState& state() const { return state_; }
    const ControllerConfig& config() const { return config_; }

private:
    void feed(const std::optional<Envelope>& env);

    Bus& bus_;
    Subscription gestures_;
    ControllerConfig config_;
    const Clock& clock_;
    LatencyTracker* latency_;
    ControllerState state_;
};

/// Jog commands in, validated motion, robot state and safety events out.
class SimNode {
public:
    SimNode(Bus& bus, const PipelineConfig& config, LatencyTracker* latency = nullptr);

    void tick(std::int64_t now_ms);

    const SimState& state() const { return state_; }
    std::uint64_t steps() const { return steps_; }

private:
    Bus& bus_;
    Subscription jogs_;
    SimConfig sim_;
    VelocityResolver resolver_;
    double payload_kg_;
    std::int64_t command_timeout_ms_;
    LatencyTracker* latency_;
    SimState state_;
    JogCommand current_{};
    std::int64_t current_received_ms_ = 0;
    std::uint64_t current_seq_ = 0;
    std::int64_t current_wall_ns_ = 0;
    bool current_reported_ = true;
    std::uint64_t steps_ = 0;
};

/// Perception, controller and sim nodes on their own threads over one bus.
class Runtime {
public:
    Runtime(std::shared_ptr<const Classifier> classifier, PipelineConfig config);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    void start();
    /// Stops the node threads after they drain what was published so far.
    void stop();

    Bus& bus() { return bus_; }
    const Clock& clock() const { return clock_; }
    LatencyTracker& latency() { return latency_; }
    PerceptionNode& perception() { return *perception_; }
    const PipelineConfig& config() const { return config_; }

    /// Thread-safe copy of the most recent robot state.
    SimState snapshot() const;

private:
    PipelineConfig config_;
    Bus bus_;
    SteadyClock clock_;
    LatencyTracker latency_;
    std::unique_ptr<PerceptionNode> perception_;
    std::unique_ptr<ControllerNode> controller_;
    std::unique_ptr<SimNode> sim_;
    std::atomic<bool> running_{false};
    std::vector<std::thread> threads_;
    mutable std::mutex snapshot_mu_;
    SimState snapshot_;
};

}  // namespace handjog
