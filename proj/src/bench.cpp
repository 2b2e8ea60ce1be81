#include "handjog/bench.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "handjog/error.hpp"
#include "handjog/random.hpp"

namespace handjog {

ClassifyBench bench_classification(const Classifier& classifier, std::size_t frames, std::uint64_t seed,
                                   const NormalizeOptions& normalize) {
    if (frames == 0) throw ValidationError("bench needs at least one frame");
    Rng rng(seed);
    std::vector<LandmarkFrame> inputs;
    inputs.reserve(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const int label = static_cast<int>(i % kGestureCount);
        inputs.push_back(jittered_frame(default_templates(), label, 0.02, 0.2, rng, static_cast<std::int64_t>(i)));
    }
    std::vector<double> ms;
    ms.reserve(frames);
    volatile int sink = 0;
    for (const auto& f : inputs) {
        const auto t0 = std::chrono::steady_clock::now();
        const FeatureVector x = normalize_frame(f, normalize);
        sink = sink + classifier.classify(x).label;
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    ClassifyBench out;
    out.frames = frames;
    out.p50_ms = percentile(ms, 50.0);
    out.p99_ms = percentile(ms, 99.0);
    out.max_ms = percentile(ms, 100.0);
    return out;
}

PipelineBench bench_pipeline(std::shared_ptr<const Classifier> classifier, const PipelineConfig& config,
                             const PipelineBenchOptions& options) {
    if (!(options.seconds > 0.0) || !(options.fps > 0.0)) throw ValidationError("bench needs seconds > 0 and fps > 0");
    Runtime rt(std::move(classifier), config);
    rt.start();

    Rng rng(options.seed);
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / options.fps));
    const auto frames = static_cast<std::size_t>(std::llround(options.seconds * options.fps));
    auto next = std::chrono::steady_clock::now();
    PipelineBench out;
    for (std::size_t i = 0; i < frames; ++i) {
        const std::int64_t now = rt.clock().now_ms();
        const bool first = (now / options.switch_ms) % 2 == 0;
        const int label = first ? options.gesture_a : options.gesture_b;
        LandmarkFrame f = jittered_frame(default_templates(), label, options.jitter_sigma, 0.2, rng, now);
        rt.bus().publish(Topic::landmarks, FrameMsg{std::move(f)}, now);
        ++out.frames_sent;
        next += period;
        std::this_thread::sleep_until(next);
    }
    // Let the last frames reach the sim before stopping.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    rt.stop();
    out.latency = rt.latency().measure(out.frames_sent);
    out.final_state = rt.snapshot();
    return out;
}

}  // namespace handjog
