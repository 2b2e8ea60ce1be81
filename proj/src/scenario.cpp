#include "handjog/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "handjog/error.hpp"
#include "handjog/wire.hpp"

namespace handjog {

std::string_view to_string(InputMode m) { return m == InputMode::frames ? "frames" : "holds"; }

std::string_view to_string(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::success: return "success";
        case VerdictStatus::failure: return "failure";
        case VerdictStatus::no_goals: return "no_goals";
    }
    return "?";
}

void ScenarioScript::validate() const {
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.t_ms < 0) throw ValidationError("scenario entry " + std::to_string(i) + " has negative time");
        if (e.t_ms < prev) {
            throw ValidationError("scenario time regression at entry " + std::to_string(i) + ": " +
                                  std::to_string(e.t_ms) + " < " + std::to_string(prev));
        }
        if (e.label && (*e.label < 0 || *e.label >= kGestureCount)) {
            throw ValidationError("scenario entry " + std::to_string(i) + " has label out of range");
        }
        prev = e.t_ms;
    }
    if (duration_ms && *duration_ms < 0) throw ValidationError("scenario duration must be >= 0");
    for (const auto& g : goals) {
        if (!(g.radius > 0.0) || !std::isfinite(g.radius)) throw ValidationError("goal radius must be > 0");
    }
    for (double q : start_q) {
        if (!std::isfinite(q)) throw ValidationError("start pose is not finite");
    }
}

std::int64_t ScenarioScript::end_ms() const {
    if (duration_ms) return *duration_ms;
    return entries.empty() ? 0 : entries.back().t_ms + 1000;
}

namespace {

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
    throw ValidationError("scenario line " + std::to_string(line) + ": " + what);
}

double read_double(std::istringstream& in, std::size_t line, const char* what) {
    std::string tok;
    if (!(in >> tok)) fail_line(line, std::string("missing ") + what);
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::logic_error&) {
        fail_line(line, std::string("bad ") + what + " '" + tok + "'");
    }
}

std::int64_t read_ms(std::istringstream& in, std::size_t line) {
    std::string tok;
    if (!(in >> tok)) fail_line(line, "missing time");
    try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::logic_error&) {
        fail_line(line, "bad time '" + tok + "'");
    }
}

std::optional<int> read_label(std::istringstream& in, std::size_t line) {
    std::string tok;
    if (!(in >> tok)) fail_line(line, "missing gesture");
    if (tok == "none") return std::nullopt;
    if (auto id = gesture_id(tok)) return *id;
    if (tok.size() == 1 && tok[0] >= '0' && tok[0] < '0' + kGestureCount) return tok[0] - '0';
    fail_line(line, "unknown gesture '" + tok + "'");
}

void expect_end(std::istringstream& in, std::size_t line) {
    std::string extra;
    if (in >> extra) fail_line(line, "unexpected '" + extra + "'");
}

}  // namespace

ScenarioScript parse_scenario(std::string_view text) {
    ScenarioScript s;
    std::istringstream all{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(all, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream in(raw);
        std::string key;
        if (!(in >> key)) continue;
        if (key == "name") {
            std::getline(in >> std::ws, s.name);
            while (!s.name.empty() && std::isspace(static_cast<unsigned char>(s.name.back()))) s.name.pop_back();
            continue;
        } else if (key == "start_deg") {
            for (std::size_t j = 0; j < kJointCount; ++j) s.start_q[j] = deg_to_rad(read_double(in, line, "angle"));
        } else if (key == "input") {
            std::string mode;
            in >> mode;
            if (mode == "frames") s.input = InputMode::frames;
            else if (mode == "holds") s.input = InputMode::holds;
            else fail_line(line, "input must be frames or holds");
        } else if (key == "duration") {
            s.duration_ms = read_ms(in, line);
            if (*s.duration_ms < 0) fail_line(line, "negative duration");
        } else if (key == "at") {
            ScenarioEntry e;
            e.t_ms = read_ms(in, line);
            e.label = read_label(in, line);
            if (e.t_ms < 0) fail_line(line, "negative time");
            if (!s.entries.empty() && e.t_ms < s.entries.back().t_ms) {
                fail_line(line, "time regression " + std::to_string(e.t_ms) + " < " +
                                    std::to_string(s.entries.back().t_ms));
            }
            s.entries.push_back(e);
        } else if (key == "goal_rel") {
            GoalRegion g;
            for (auto& c : g.offset) c = read_double(in, line, "offset");
            g.radius = read_double(in, line, "radius");
            if (!(g.radius > 0.0)) fail_line(line, "radius must be > 0");
            std::string act;
            in >> act;
            if (act == "close") g.action = GripperAction::close;
            else if (act == "open") g.action = GripperAction::open;
            else fail_line(line, "goal action must be open or close");
            s.goals.push_back(g);
        } else {
            fail_line(line, "unknown directive '" + key + "'");
        }
        expect_end(in, line);
    }
    s.validate();
    return s;
}

ScenarioScript load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

namespace {

// Shortest text that reads back to the same double.
std::string num(double d) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, r.ptr);
}

}  // namespace

std::string format_scenario(const ScenarioScript& s) {
    std::ostringstream out;
    if (!s.name.empty()) out << "name " << s.name << '\n';
    out << "start_deg";
    for (double q : s.start_q) out << ' ' << num(rad_to_deg(q));
    out << "\ninput " << to_string(s.input) << '\n';
    if (s.duration_ms) out << "duration " << *s.duration_ms << '\n';
    for (const auto& e : s.entries) {
        out << "at " << e.t_ms << ' ' << (e.label ? std::string(gesture_name(*e.label)) : std::string("none")) << '\n';
    }
    for (const auto& g : s.goals) {
        out << "goal_rel " << num(g.offset[0]) << ' ' << num(g.offset[1]) << ' ' << num(g.offset[2]) << ' '
            << num(g.radius) << ' ' << to_string(g.action) << '\n';
    }
    return out.str();
}

// The built-in scripts are also shipped as text under assets/scenarios.
static constexpr std::string_view kPickPlace = R"(name pick-place
input frames
# jog +x to A and grab
at 0 ThumbUp
at 2000 none
at 2500 Fist
at 3000 none
# lift, move -y, lower to B and release
at 3500 PointUp
at 4500 PointLeft
at 6500 PointDown
at 7500 none
at 8000 OpenPalm
at 8500 none
duration 9500
goal_rel 0.1 0 0 0.03 close
goal_rel 0.1 -0.1 0 0.03 open
)";

static constexpr std::string_view kLimitSeek = R"(name limit-seek
input holds
at 0 PointDown
duration 20000
)";

ScenarioScript canonical_pick_place() { return parse_scenario(kPickPlace); }
ScenarioScript limit_seek() { return parse_scenario(kLimitSeek); }

AuditReport audit_log(const ScenarioLog& log, const SafetyEnvelope& envelope) {
    AuditReport r;
    for (const auto& s : log.states) {
        ++r.states_checked;
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const double deg = rad_to_deg(s.q[j]);
            if (deg < envelope.joint_limits[j].min_deg || deg > envelope.joint_limits[j].max_deg) {
                ++r.joint_violations;
                break;
            }
        }
        if (!within_speed_limits(s.qdot, envelope)) ++r.speed_violations;
    }
    return r;
}

ScenarioVerdict judge(const ScenarioScript& script, const ScenarioLog& log, const Pose& start) {
    ScenarioVerdict v;
    v.safety_events = log.safety.size();
    for (const auto& m : log.safety) {
        for (auto reason : m.reasons) {
            if (reason == SafetyReason::joint_limit) {
                ++v.joint_limit_events;
                break;
            }
        }
        if (!m.accepted) ++v.rejections;
    }

    struct Change {
        std::int64_t t;
        GripperAction action;
        Vec3 ee;
    };
    std::vector<Change> changes;
    for (std::size_t i = 1; i < log.states.size(); ++i) {
        const auto& a = log.states[i - 1];
        const auto& b = log.states[i];
        if (a.gripper != b.gripper) {
            changes.push_back({b.t_ms, b.gripper == GripperState::closed ? GripperAction::close : GripperAction::open,
                               b.ee});
        }
    }

    if (script.goals.empty()) {
        v.status = VerdictStatus::no_goals;
        return v;
    }

    bool ok = true;
    for (std::size_t g = 0; g < script.goals.size(); ++g) {
        const GoalRegion& goal = script.goals[g];
        if (g >= changes.size()) {
            v.notes.push_back("goal " + std::to_string(g) + ": no gripper " + std::string(to_string(goal.action)));
            ok = false;
            break;
        }
        const Change& c = changes[g];
        if (c.action != goal.action) {
            v.notes.push_back("goal " + std::to_string(g) + ": expected " + std::string(to_string(goal.action)) +
                              ", got " + std::string(to_string(c.action)));
            ok = false;
            break;
        }
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double d = c.ee[k] - (start.position[k] + goal.offset[k]);
            d2 += d * d;
        }
        const double dist = std::sqrt(d2);
        if (dist > goal.radius) {
            v.notes.push_back("goal " + std::to_string(g) + ": " + std::string(to_string(c.action)) + " at " +
                              std::to_string(dist) + " m from the region centre");
            ok = false;
            break;
        }
        ++v.goals_reached;
    }
    if (ok && changes.size() > script.goals.size()) {
        v.notes.push_back("unexpected extra gripper change at t=" + std::to_string(changes[script.goals.size()].t));
        ok = false;
    }
    if (v.rejections > 0) {
        v.notes.push_back(std::to_string(v.rejections) + " rejected motions");
        ok = false;
    }
    v.status = ok ? VerdictStatus::success : VerdictStatus::failure;
    return v;
}

ScenarioResult run_scenario(const ScenarioScript& script, std::shared_ptr<const Classifier> classifier,
                            const ScenarioOptions& options) {
    script.validate();
    if (script.input == InputMode::frames && !classifier) {
        throw ValidationError("scenario uses frame input but no model was given");
    }
    if (options.input_period_ms < 1) throw ValidationError("input_period_ms must be >= 1");
    if (!(options.jitter_sigma >= 0.0)) throw ValidationError("jitter_sigma must be >= 0");

    PipelineConfig cfg = options.pipeline;
    cfg.initial_q = script.start_q;
    cfg.validate();
    const auto sim_period_ms = static_cast<std::int64_t>(std::llround(cfg.sim.dt * 1000.0));
    if (sim_period_ms < 1 || std::abs(cfg.sim.dt * 1000.0 - static_cast<double>(sim_period_ms)) > 1e-9) {
        throw ValidationError("scenario runs need a whole-millisecond sim dt");
    }

    Bus bus(cfg.queue_capacity);
    VirtualClock clock(0);
    Subscription tap = bus.subscribe({Topic::gesture, Topic::jog, Topic::state, Topic::safety});
    if (!classifier) {
        // Hold input never reaches the classifier; any model satisfies the node.
        classifier = std::make_shared<Classifier>(MlpParams::zeros(default_layer_spec()));
    }
    PerceptionNode perception(bus, classifier, cfg.normalize);
    ControllerNode controller(bus, cfg.controller, clock);
    SimNode sim(bus, cfg);

    ScenarioResult result;
    ScenarioLog& log = result.log;
    const Pose start = sim.state().ee;
    auto record_state = [&](std::int64_t t, const SimState& s) {
        log.states.push_back({t, s.q, s.qdot, {s.ee.position.x(), s.ee.position.y(), s.ee.position.z()}, s.gripper});
    };
    record_state(0, sim.state());
    log.lines.push_back(wire::encode(wire::make_state_msg(sim.state(), 0, 0)));

    auto drain = [&] {
        while (auto env = tap.try_pop()) {
            if (auto line = wire::encode_outbound(*env)) log.lines.push_back(*line);
            std::visit(
                [&](const auto& m) {
                    using T = std::decay_t<decltype(m)>;
                    if constexpr (std::is_same_v<T, GestureMsg>) log.gestures.push_back(m);
                    else if constexpr (std::is_same_v<T, JogMsg>) log.jogs.push_back(m.command);
                    else if constexpr (std::is_same_v<T, SafetyMsg>) log.safety.push_back(m);
                    else if constexpr (std::is_same_v<T, StateMsg>) {
                        StateRecord r{m.t, m.q, m.qdot, m.ee, m.gripper};
                        log.states.push_back(r);
                    }
                },
                env->payload);
        }
    };

    Rng rng(options.seed);
    const std::int64_t end = script.end_ms();
    std::size_t next_entry = 0;
    std::optional<int> current;
    for (std::int64_t t = 0; t < end; ++t) {
        clock.set(t);
        while (next_entry < script.entries.size() && script.entries[next_entry].t_ms <= t) {
            current = script.entries[next_entry].label;
            ++next_entry;
        }
        if (current && t % options.input_period_ms == 0) {
            if (script.input == InputMode::frames) {
                LandmarkFrame f = jittered_frame(default_templates(), *current, options.jitter_sigma,
                                                 options.max_translation, rng, t);
                bus.publish(Topic::landmarks, FrameMsg{std::move(f)}, t);
            } else {
                perception.inject_hold(*current, t);
            }
        }
        perception.poll();
        if (t % cfg.controller_tick_ms == 0) controller.tick();
        if (t % sim_period_ms == 0) sim.tick(t);
        drain();
    }

    result.audit = audit_log(log, cfg.sim.envelope);
    result.verdict = judge(script, log, start);
    if (!result.audit.ok()) {
        result.verdict.notes.push_back("audit: " + std::to_string(result.audit.joint_violations) +
                                       " joint-limit and " + std::to_string(result.audit.speed_violations) +
                                       " speed violations");
        if (result.verdict.status == VerdictStatus::success) result.verdict.status = VerdictStatus::failure;
    }
    return result;
}

}  // namespace handjog
