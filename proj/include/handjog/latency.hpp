#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string_view>
#include <vector>

namespace handjog {

enum class Stage : std::uint8_t { frame_to_gesture = 0, gesture_to_jog, jog_to_state, frame_to_jog };

inline constexpr std::size_t kStageCount = 4;

std::string_view stage_name(Stage s);

struct StageLatency {
    std::size_t samples = 0;
    double p50_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
};

struct LatencyReport {
    std::size_t window = 0;
    std::array<StageLatency, kStageCount> stages{};
    /// No sample arrived within the staleness horizon before the report.
    bool stale = false;

    const StageLatency& operator[](Stage s) const { return stages[static_cast<std::size_t>(s)]; }
};

/// Nearest-rank percentile of an unsorted sample set (p in [0, 100]).
double percentile(std::vector<double> values, double p);

/// Rolling per-stage latency samples; record() is thread-safe.
class LatencyTracker {
public:
    explicit LatencyTracker(std::size_t capacity = 4096, std::int64_t stale_after_ns = 1'000'000'000);

    void record(Stage stage, std::int64_t latency_ns);
    void clear();

    /// Report over the newest `window` samples of each stage. Throws
    /// ValidationError when no stage has any sample.
    LatencyReport measure(std::size_t window) const;

private:
    std::size_t capacity_;
    std::int64_t stale_after_ns_;
    mutable std::mutex mu_;
    std::array<std::deque<double>, kStageCount> samples_ms_;
    std::int64_t last_record_ns_ = 0;
};

}  // namespace handjog
