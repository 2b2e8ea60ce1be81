#include "handjog/pipeline.hpp"

#include <cmath>

#include "handjog/bytes.hpp"
#include "handjog/error.hpp"
#include "handjog/wire.hpp"

namespace handjog {

GestureEvent Classifier::classify(std::span<const double> features) const {
    if (const auto* q = std::get_if<QuantizedModel>(&model_)) return quantized_forward(*q, features).event;
    const auto& p = std::get<MlpParams>(model_);
    const auto r = forward(p, features);
    const int label = argmax(r.probabilities);
    return {label, r.probabilities[static_cast<std::size_t>(label)]};
}

ModelKind model_kind(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    const std::string_view magic(reinterpret_cast<const char*>(bytes.data()), std::min<std::size_t>(bytes.size(), 4));
    if (magic == "TGN1") return ModelKind::float_model;
    if (magic == "TGQ1") return ModelKind::quantized_model;
    throw ValidationError(path.string() + ": not a model file (unknown magic)");
}

std::shared_ptr<const Classifier> load_classifier(const std::filesystem::path& path) {
    if (model_kind(path) == ModelKind::float_model) return std::make_shared<Classifier>(load_float_model(path));
    return std::make_shared<Classifier>(load_quantized_model(path));
}

void PipelineConfig::validate() const {
    controller.validate();
    sim.validate();
    check_payload(payload_kg, sim.envelope);  // throws only on a negative mass
    if (queue_capacity < 1) throw ValidationError("queue_capacity must be >= 1");
    if (controller_tick_ms < 1) throw ValidationError("controller_tick_ms must be >= 1");
    if (command_timeout_ms < 0) throw ValidationError("command_timeout_ms must be >= 0");
    if (!within_joint_limits(initial_q, sim.envelope)) throw ValidationError("initial joint position outside limits");
}

PerceptionNode::PerceptionNode(Bus& bus, std::shared_ptr<const Classifier> classifier, NormalizeOptions normalize,
                               LatencyTracker* latency)
    : bus_(bus),
      frames_(bus.subscribe(Topic::landmarks)),
      classifier_(std::move(classifier)),
      normalize_(normalize),
      latency_(latency) {}

void PerceptionNode::handle(const Envelope& env) {
    const auto& frame = std::get<FrameMsg>(env.payload).frame;
    FeatureVector features;
    try {
        features = normalize_frame(frame, normalize_);
    } catch (const ValidationError&) {
        ++rejected_;
        return;
    }
    const GestureEvent ev = classifier_->classify(features);
    GestureMsg msg{frame.timestamp_ms, ev.label, ev.confidence, env.seq, env.wall_ns};
    bus_.publish(Topic::gesture, msg, env.stamp_ms);
    if (latency_) latency_->record(Stage::frame_to_gesture, steady_now_ns() - env.wall_ns);
}

std::size_t PerceptionNode::poll() {
    std::size_t n = 0;
    while (auto env = frames_.try_pop()) {
        handle(*env);
        ++n;
    }
    return n;
}

std::size_t PerceptionNode::wait_and_poll(std::chrono::nanoseconds timeout) {
    auto env = frames_.pop_for(timeout);
    if (!env) return 0;
    handle(*env);
    return 1 + poll();
}

void PerceptionNode::inject_hold(int label, std::int64_t t_ms) {
    if (label < 0 || label >= kGestureCount) throw ValidationError("gesture label out of range");
    const std::int64_t now = steady_now_ns();
    bus_.publish(Topic::gesture, GestureMsg{t_ms, label, 1.0, 0, now}, t_ms);
}

ControllerNode::ControllerNode(Bus& bus, ControllerConfig config, const Clock& clock, LatencyTracker* latency)
    : bus_(bus), gestures_(bus.subscribe(Topic::gesture)), config_(std::move(config)), clock_(clock), latency_(latency) {
    config_.validate();
}

void ControllerNode::feed(const std::optional<Envelope>& env) {
    const std::int64_t now = clock_.now_ms();
    std::optional<GestureEvent> ev;
    const GestureMsg* g = nullptr;
    if (env) {
        g = &std::get<GestureMsg>(env->payload);
        ev = GestureEvent{g->label, g->confidence};
    }
    ControllerUpdate u = update(state_, ev, now, config_);
    state_ = u.state;
    if (!u.command) return;
    JogMsg msg{*u.command, env ? env->seq : 0, env ? env->wall_ns : 0, g ? g->frame_wall_ns : 0};
    bus_.publish(Topic::jog, msg, now);
    if (latency_ && env) {
        const std::int64_t t = steady_now_ns();
        latency_->record(Stage::gesture_to_jog, t - env->wall_ns);
        if (g->frame_wall_ns != 0 && g->frame_seq != 0) latency_->record(Stage::frame_to_jog, t - g->frame_wall_ns);
    }
}

void ControllerNode::tick() {
    bool any = false;
    while (auto env = gestures_.try_pop()) {
        feed(env);
        any = true;
    }
    if (!any) feed(std::nullopt);
}

void ControllerNode::wait_and_tick(std::chrono::nanoseconds timeout) {
    auto env = gestures_.pop_for(timeout);
    if (!env) {
        feed(std::nullopt);
        return;
    }
    feed(env);
    while (auto more = gestures_.try_pop()) feed(more);
}

SimNode::SimNode(Bus& bus, const PipelineConfig& config, LatencyTracker* latency)
    : bus_(bus),
      jogs_(bus.subscribe(Topic::jog)),
      sim_(config.sim),
      resolver_(make_resolver(config.sim)),
      payload_kg_(config.payload_kg),
      command_timeout_ms_(config.command_timeout_ms),
      latency_(latency),
      state_(SimState::at(config.initial_q, config.sim)) {
    sim_.validate();
}

void SimNode::tick(std::int64_t now_ms) {
    std::optional<GripperAction> grip;
    while (auto env = jogs_.try_pop()) {
        const auto& jm = std::get<JogMsg>(env->payload);
        current_ = jm.command;
        current_received_ms_ = now_ms;
        current_seq_ = env->seq;
        current_wall_ns_ = env->wall_ns;
        current_reported_ = false;
        if (jm.command.gripper_action) grip = jm.command.gripper_action;
    }

    JogCommand cmd = current_;
    cmd.gripper_action = grip;
    if (now_ms - current_received_ms_ > command_timeout_ms_) cmd.linear_velocity = {};

    const JogValidation check =
        validate_jog(cmd, state_.q, payload_kg_, sim_.envelope, resolver_, sim_.dt);
    if (!check.verdict.accepted) cmd.linear_velocity = {};

    StepResult r = step(state_, cmd, sim_);
    state_ = r.state;
    ++steps_;

    SafetyVerdict verdict = check.verdict;
    verdict.merge(r.verdict);

    bus_.publish(Topic::state, wire::make_state_msg(state_, now_ms, current_seq_), now_ms);
    if (!current_reported_) {
        if (latency_ && current_wall_ns_ != 0) latency_->record(Stage::jog_to_state, steady_now_ns() - current_wall_ns_);
        current_reported_ = true;
    }
    if (!verdict.reasons.empty()) {
        bus_.publish(Topic::safety, SafetyMsg{now_ms, verdict.reasons, verdict.clamped, verdict.accepted}, now_ms);
    }
}

Runtime::Runtime(std::shared_ptr<const Classifier> classifier, PipelineConfig config)
    : config_(std::move(config)), bus_(config_.queue_capacity) {
    config_.validate();
    perception_ = std::make_unique<PerceptionNode>(bus_, std::move(classifier), config_.normalize, &latency_);
    controller_ = std::make_unique<ControllerNode>(bus_, config_.controller, clock_, &latency_);
    sim_ = std::make_unique<SimNode>(bus_, config_, &latency_);
    snapshot_ = sim_->state();
}

Runtime::~Runtime() { stop(); }

void Runtime::start() {
    if (running_.exchange(true)) return;
    const auto tick = std::chrono::milliseconds(config_.controller_tick_ms);
    threads_.emplace_back([this] {
        while (running_) perception_->wait_and_poll(std::chrono::milliseconds(20));
        perception_->poll();
    });
    threads_.emplace_back([this, tick] {
        while (running_) controller_->wait_and_tick(tick);
        controller_->tick();
    });
    threads_.emplace_back([this] {
        const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(config_.sim.dt));
        auto next = std::chrono::steady_clock::now();
        while (running_) {
            sim_->tick(clock_.now_ms());
            {
                std::lock_guard lock(snapshot_mu_);
                snapshot_ = sim_->state();
            }
            next += period;
            std::this_thread::sleep_until(next);
        }
    });
}

void Runtime::stop() {
    if (!running_.exchange(false)) return;
    bus_.close();
    for (auto& t : threads_) {
        if (t.joinable()) t.join();
    }
    threads_.clear();
}

SimState Runtime::snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return snapshot_;
}

}  // namespace handjog
