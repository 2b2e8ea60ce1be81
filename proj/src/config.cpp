#include "handjog/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "handjog/error.hpp"

namespace handjog {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

double to_double(std::string_view v) {
    const std::string s(v);
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(s, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(d)) throw ValidationError("not a number: '" + s + "'");
    return d;
}

long long to_int(std::string_view v) {
    long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ValidationError("not an integer: '" + std::string(v) + "'");
    return out;
}

std::size_t to_count(std::string_view v) {
    const long long n = to_int(v);
    if (n < 0) throw ValidationError("must be >= 0: '" + std::string(v) + "'");
    return static_cast<std::size_t>(n);
}

bool to_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("not a boolean: '" + std::string(v) + "'");
}

std::string fmt(double d) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, r.ptr);
}

using Setter = std::function<void(AppConfig&, std::string_view)>;
using Getter = std::function<std::string(const AppConfig&)>;

struct Key {
    Setter set;
    Getter get;
};

const std::map<std::string, Key, std::less<>>& keys() {
    static const std::map<std::string, Key, std::less<>> table = [] {
        std::map<std::string, Key, std::less<>> k;
        // data
        k["per_class"] = {[](AppConfig& c, std::string_view v) { c.data.per_class = to_count(v); },
                          [](const AppConfig& c) { return std::to_string(c.data.per_class); }};
        k["jitter_sigma"] = {[](AppConfig& c, std::string_view v) { c.data.jitter_sigma = to_double(v); },
                             [](const AppConfig& c) { return fmt(c.data.jitter_sigma); }};
        k["max_translation"] = {[](AppConfig& c, std::string_view v) { c.data.max_translation = to_double(v); },
                                [](const AppConfig& c) { return fmt(c.data.max_translation); }};
        k["max_abs_scale"] = {[](AppConfig& c, std::string_view v) {
                                  c.data.normalize.max_abs_scale = to_bool(v);
                                  c.pipeline.normalize.max_abs_scale = c.data.normalize.max_abs_scale;
                              },
                              [](const AppConfig& c) { return std::string(c.data.normalize.max_abs_scale ? "true" : "false"); }};
        k["val_per_class"] = {[](AppConfig& c, std::string_view v) { c.val_per_class = to_count(v); },
                              [](const AppConfig& c) { return std::to_string(c.val_per_class); }};
        // model + training
        k["spec"] = {[](AppConfig& c, std::string_view v) { c.spec = parse_layer_spec(v); },
                     [](const AppConfig& c) { return format_layer_spec(c.spec); }};
        k["learning_rate"] = {[](AppConfig& c, std::string_view v) { c.train.learning_rate = to_double(v); },
                              [](const AppConfig& c) { return fmt(c.train.learning_rate); }};
        k["epochs"] = {[](AppConfig& c, std::string_view v) { c.train.epochs = static_cast<int>(to_int(v)); },
                       [](const AppConfig& c) { return std::to_string(c.train.epochs); }};
        k["batch_size"] = {[](AppConfig& c, std::string_view v) { c.train.batch_size = static_cast<int>(to_int(v)); },
                           [](const AppConfig& c) { return std::to_string(c.train.batch_size); }};
        k["init"] = {[](AppConfig& c, std::string_view v) {
                         if (v == "he_uniform") c.train.init = InitScheme::he_uniform;
                         else if (v == "xavier_uniform") c.train.init = InitScheme::xavier_uniform;
                         else throw ValidationError("init must be he_uniform or xavier_uniform");
                     },
                     [](const AppConfig& c) {
                         return std::string(c.train.init == InitScheme::he_uniform ? "he_uniform" : "xavier_uniform");
                     }};
        k["prune_sparsity"] = {[](AppConfig& c, std::string_view v) { c.prune.target_sparsity = to_double(v); },
                               [](const AppConfig& c) { return fmt(c.prune.target_sparsity); }};
        // controller
        k["confidence_threshold"] = {
            [](AppConfig& c, std::string_view v) { c.pipeline.controller.confidence_threshold = to_double(v); },
            [](const AppConfig& c) { return fmt(c.pipeline.controller.confidence_threshold); }};
        k["debounce_frames"] = {
            [](AppConfig& c, std::string_view v) { c.pipeline.controller.debounce_frames = static_cast<int>(to_int(v)); },
            [](const AppConfig& c) { return std::to_string(c.pipeline.controller.debounce_frames); }};
        k["jog_speed"] = {[](AppConfig& c, std::string_view v) { c.pipeline.controller.jog_speed = to_double(v); },
                          [](const AppConfig& c) { return fmt(c.pipeline.controller.jog_speed); }};
        k["gesture_timeout_ms"] = {
            [](AppConfig& c, std::string_view v) { c.pipeline.controller.gesture_timeout_ms = to_int(v); },
            [](const AppConfig& c) { return std::to_string(c.pipeline.controller.gesture_timeout_ms); }};
        k["gesture_map"] = {[](AppConfig& c, std::string_view v) {
                                c.pipeline.controller.gesture_map = load_gesture_map(std::filesystem::path(std::string(v)));
                            },
                            [](const AppConfig& c) {
                                // Inline form; the file path is not retained.
                                std::string s = format_gesture_map(c.pipeline.controller.gesture_map);
                                for (auto& ch : s) {
                                    if (ch == '\n') ch = ';';
                                }
                                return s;
                            }};
        // safety + sim
        k["sim_dt"] = {[](AppConfig& c, std::string_view v) { c.pipeline.sim.dt = to_double(v); },
                       [](const AppConfig& c) { return fmt(c.pipeline.sim.dt); }};
        k["dls_damping"] = {[](AppConfig& c, std::string_view v) { c.pipeline.sim.damping = to_double(v); },
                            [](const AppConfig& c) { return fmt(c.pipeline.sim.damping); }};
        k["speed_fraction"] = {[](AppConfig& c, std::string_view v) { c.pipeline.sim.envelope.speed_fraction = to_double(v); },
                               [](const AppConfig& c) { return fmt(c.pipeline.sim.envelope.speed_fraction); }};
        k["payload_cap"] = {[](AppConfig& c, std::string_view v) { c.pipeline.sim.envelope.payload_cap = to_double(v); },
                            [](const AppConfig& c) { return fmt(c.pipeline.sim.envelope.payload_cap); }};
        k["shoulder_lift_min_deg"] = {
            [](AppConfig& c, std::string_view v) {
                c.pipeline.sim.envelope.joint_limits[kShoulderLift].min_deg = to_double(v);
            },
            [](const AppConfig& c) { return fmt(c.pipeline.sim.envelope.joint_limits[kShoulderLift].min_deg); }};
        k["shoulder_lift_max_deg"] = {
            [](AppConfig& c, std::string_view v) {
                c.pipeline.sim.envelope.joint_limits[kShoulderLift].max_deg = to_double(v);
            },
            [](const AppConfig& c) { return fmt(c.pipeline.sim.envelope.joint_limits[kShoulderLift].max_deg); }};
        k["payload_kg"] = {[](AppConfig& c, std::string_view v) { c.pipeline.payload_kg = to_double(v); },
                           [](const AppConfig& c) { return fmt(c.pipeline.payload_kg); }};
        // runtime
        k["queue_capacity"] = {[](AppConfig& c, std::string_view v) { c.pipeline.queue_capacity = to_count(v); },
                               [](const AppConfig& c) { return std::to_string(c.pipeline.queue_capacity); }};
        k["controller_tick_ms"] = {[](AppConfig& c, std::string_view v) { c.pipeline.controller_tick_ms = to_int(v); },
                                   [](const AppConfig& c) { return std::to_string(c.pipeline.controller_tick_ms); }};
        k["command_timeout_ms"] = {[](AppConfig& c, std::string_view v) { c.pipeline.command_timeout_ms = to_int(v); },
                                   [](const AppConfig& c) { return std::to_string(c.pipeline.command_timeout_ms); }};
        k["live_jitter_sigma"] = {[](AppConfig& c, std::string_view v) { c.jitter_sigma_live = to_double(v); },
                                  [](const AppConfig& c) { return fmt(c.jitter_sigma_live); }};
        k["input_period_ms"] = {[](AppConfig& c, std::string_view v) { c.input_period_ms = to_int(v); },
                                [](const AppConfig& c) { return std::to_string(c.input_period_ms); }};
        k["bench_seconds"] = {[](AppConfig& c, std::string_view v) { c.bench_seconds = to_double(v); },
                              [](const AppConfig& c) { return fmt(c.bench_seconds); }};
        k["latency_window"] = {[](AppConfig& c, std::string_view v) { c.latency_window = to_count(v); },
                               [](const AppConfig& c) { return std::to_string(c.latency_window); }};
        // one seed drives data, split, init and shuffling unless overridden per command
        k["seed"] = {[](AppConfig& c, std::string_view v) {
                         const auto s = static_cast<std::uint64_t>(to_count(v));
                         c.data.seed = s;
                         c.train.seed = s;
                     },
                     [](const AppConfig& c) { return std::to_string(c.train.seed); }};
        return k;
    }();
    return table;
}

}  // namespace

void AppConfig::validate() const {
    spec.validate();
    train.validate();
    pipeline.validate();
    if (data.per_class < 1) throw ValidationError("per_class must be >= 1");
    if (!(data.jitter_sigma >= 0.0)) throw ValidationError("jitter_sigma must be >= 0");
    if (!(data.max_translation >= 0.0)) throw ValidationError("max_translation must be >= 0");
    if (!(jitter_sigma_live >= 0.0)) throw ValidationError("live_jitter_sigma must be >= 0");
    if (!(prune.target_sparsity >= 0.0 && prune.target_sparsity < 1.0)) {
        throw ValidationError("prune_sparsity must be in [0, 1)");
    }
    if (input_period_ms < 1) throw ValidationError("input_period_ms must be >= 1");
    if (!(bench_seconds > 0.0)) throw ValidationError("bench_seconds must be > 0");
    if (latency_window < 1) throw ValidationError("latency_window must be >= 1");
    if (spec.input_width() != static_cast<int>(kFeatureLength)) {
        throw ValidationError("spec input width must be " + std::to_string(kFeatureLength));
    }
}

void set_config_value(AppConfig& config, std::string_view key, std::string_view value) {
    const auto it = keys().find(key);
    if (it == keys().end()) throw ValidationError("unknown config key '" + std::string(key) + "'");
    it->second.set(config, value);
}

AppConfig parse_config(std::string_view text, AppConfig base) {
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    std::set<std::string> seen;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string body = trim(raw);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (!seen.insert(key).second) {
            throw ValidationError("config line " + std::to_string(line) + ": duplicate key '" + key + "'");
        }
        try {
            set_config_value(base, key, value);
        } catch (const Error& e) {
            throw ValidationError("config line " + std::to_string(line) + ": " + e.what());
        }
    }
    base.validate();
    return base;
}

AppConfig load_config(const std::filesystem::path& path, AppConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::map<std::string, std::string> config_snapshot(const AppConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& [k, key] : keys()) out[k] = key.get(config);
    return out;
}

}  // namespace handjog
