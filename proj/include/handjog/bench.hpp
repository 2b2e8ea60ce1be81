#pragma once

#include <cstdint>
#include <memory>

#include "handjog/latency.hpp"
#include "handjog/pipeline.hpp"

namespace handjog {

/// Timing of normalize + classify for single frames, in ms.
struct ClassifyBench {
    std::size_t frames = 0;
    double p50_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
};

ClassifyBench bench_classification(const Classifier& classifier, std::size_t frames, std::uint64_t seed,
                                   const NormalizeOptions& normalize = {});

struct PipelineBenchOptions {
    double seconds = 10.0;
    double fps = 30.0;
    std::uint64_t seed = 7;
    double jitter_sigma = 0.02;
    /// Held gestures alternate between these two every `switch_ms`.
    int gesture_a = static_cast<int>(Gesture::PointUp);
    int gesture_b = static_cast<int>(Gesture::PointDown);
    std::int64_t switch_ms = 1000;
};

struct PipelineBench {
    std::size_t frames_sent = 0;
    LatencyReport latency;
    SimState final_state;
};

/// Threaded runtime fed with synthetic frames at a fixed rate.
PipelineBench bench_pipeline(std::shared_ptr<const Classifier> classifier, const PipelineConfig& config,
                             const PipelineBenchOptions& options);

}  // namespace handjog
