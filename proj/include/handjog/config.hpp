#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "handjog/compress.hpp"
#include "handjog/landmarks.hpp"
#include "handjog/pipeline.hpp"
#include "handjog/tinynet.hpp"

namespace handjog {

/// Every tunable default the command-line tool knows about.
struct AppConfig {
    SyntheticOptions data;
    std::size_t val_per_class = 50;
    LayerSpec spec = default_layer_spec();
    TrainConfig train;
    PruneConfig prune;
    PipelineConfig pipeline;
    double jitter_sigma_live = 0.02;  // synthetic streams (sim, bench)
    std::int64_t input_period_ms = 33;
    double bench_seconds = 10.0;
    std::size_t latency_window = 300;

    void validate() const;
};

/// `key = value` lines, `#` comments. Unknown keys, duplicates and bad
/// values throw ValidationError naming the line.
AppConfig parse_config(std::string_view text, AppConfig base = {});
AppConfig load_config(const std::filesystem::path& path, AppConfig base = {});

/// Every key with its current value, as text.
std::map<std::string, std::string> config_snapshot(const AppConfig& config);

/// Applies one key; used by the parser and by command-line overrides.
void set_config_value(AppConfig& config, std::string_view key, std::string_view value);

}  // namespace handjog
