#include "handjog/latency.hpp"

#include <algorithm>
#include <cmath>

#include "handjog/bus.hpp"
#include "handjog/error.hpp"

namespace handjog {

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::frame_to_gesture: return "frame_to_gesture";
        case Stage::gesture_to_jog: return "gesture_to_jog";
        case Stage::jog_to_state: return "jog_to_state";
        case Stage::frame_to_jog: return "frame_to_jog";
    }
    return "";
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p / 100.0 * n)));
    return values[std::min(rank, values.size()) - 1];
}

LatencyTracker::LatencyTracker(std::size_t capacity, std::int64_t stale_after_ns)
    : capacity_(capacity), stale_after_ns_(stale_after_ns) {}

void LatencyTracker::record(Stage stage, std::int64_t latency_ns) {
    std::lock_guard lock(mu_);
    auto& q = samples_ms_[static_cast<std::size_t>(stage)];
    q.push_back(static_cast<double>(latency_ns) / 1e6);
    if (q.size() > capacity_) q.pop_front();
    last_record_ns_ = steady_now_ns();
}

void LatencyTracker::clear() {
    std::lock_guard lock(mu_);
    for (auto& q : samples_ms_) q.clear();
    last_record_ns_ = 0;
}

LatencyReport LatencyTracker::measure(std::size_t window) const {
    if (window == 0) throw ValidationError("latency window must be >= 1");
    std::lock_guard lock(mu_);
    LatencyReport report;
    report.window = window;
    bool any = false;
    for (std::size_t s = 0; s < kStageCount; ++s) {
        const auto& q = samples_ms_[s];
        if (q.empty()) continue;
        any = true;
        const std::size_t n = std::min(window, q.size());
        std::vector<double> recent(q.end() - static_cast<std::ptrdiff_t>(n), q.end());
        auto& out = report.stages[s];
        out.samples = n;
        out.p50_ms = percentile(recent, 50.0);
        out.p99_ms = percentile(recent, 99.0);
        out.max_ms = *std::max_element(recent.begin(), recent.end());
    }
    if (!any) throw ValidationError("latency window is empty");
    report.stale = steady_now_ns() - last_record_ns_ > stale_after_ns_;
    return report;
}

}  // namespace handjog
