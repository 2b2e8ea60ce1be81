#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "handjog/random.hpp"

namespace handjog {

inline constexpr std::size_t kLandmarkCount = 21;
inline constexpr std::size_t kFeatureLength = 2 * kLandmarkCount;
inline constexpr int kGestureCount = 8;

/// One hand keypoint in normalized image coordinates.
struct Landmark {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Landmark&) const = default;
};

enum class Handedness { unknown, left, right };

std::string_view to_string(Handedness h);
std::optional<Handedness> parse_handedness(std::string_view s);

/// 21 landmarks from one camera frame; index 0 is the wrist.
struct LandmarkFrame {
    std::int64_t timestamp_ms = 0;
    std::vector<Landmark> points;
    Handedness handedness = Handedness::unknown;
};

using FeatureVector = std::array<double, kFeatureLength>;

/// Gesture ids. Fist = 0 and ThumbUp = 7 are fixed; the rest follow the
/// shipped naming table.
enum class Gesture : int {
    Fist = 0,
    OpenPalm = 1,
    PointUp = 2,
    PointDown = 3,
    PointLeft = 4,
    PointRight = 5,
    Peace = 6,
    ThumbUp = 7,
};

std::string_view gesture_name(int id);
std::optional<int> gesture_id(std::string_view name);

struct LabeledSample {
    int label = 0;
    std::vector<double> features;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    int class_count = kGestureCount;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::size_t feature_width() const { return samples.empty() ? 0 : samples.front().features.size(); }
    std::vector<std::size_t> class_counts() const;
};

struct NormalizeOptions {
    /// Divide the wrist-relative vector by its largest absolute entry.
    bool max_abs_scale = false;
};

/// Wrist-relative, flattened features: pair i is (x_i - x_0, y_i - y_0).
/// Throws ValidationError on a wrong point count or non-finite coordinate.
FeatureVector normalize_frame(const LandmarkFrame& frame, const NormalizeOptions& options = {});

Dataset read_dataset(const std::filesystem::path& path, int class_count = kGestureCount);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

std::string format_dataset_csv(const Dataset& dataset);
Dataset parse_dataset_csv(std::string_view text, int class_count = kGestureCount);

struct DatasetSplit {
    Dataset train;
    Dataset val;
};

/// Draws `val_per_class` samples of every class into `val` without
/// replacement; everything else goes to `train`. Sample order within each
/// output follows the input order.
DatasetSplit split_dataset(const Dataset& dataset, std::size_t val_per_class, std::uint64_t seed);

/// One fixed skeleton per gesture class, in image coordinates.
using HandTemplate = std::array<Landmark, kLandmarkCount>;

struct TemplateSet {
    std::string version;
    std::array<HandTemplate, kGestureCount> hands;
};

const TemplateSet& default_templates();

/// Loads a template set from text: a `version <tag>` line followed by one
/// line per class holding `id x0 y0 x1 y1 ... x20 y20`.
TemplateSet load_templates(const std::filesystem::path& path);

LandmarkFrame template_frame(const TemplateSet& templates, int label, std::int64_t timestamp_ms = 0);

struct SyntheticOptions {
    std::size_t per_class = 200;
    double jitter_sigma = 0.02;
    std::uint64_t seed = 7;
    /// Half-width of the uniform global translation applied per sample.
    double max_translation = 0.2;
    NormalizeOptions normalize;
};

/// Per class: template + N(0, sigma^2) jitter per coordinate + a random
/// global shift, normalized. Samples are grouped by class.
Dataset generate_synthetic_dataset(const SyntheticOptions& options,
                                   const TemplateSet& templates = default_templates());

/// Jittered, shifted copy of one template; used for live synthetic streams.
LandmarkFrame jittered_frame(const TemplateSet& templates, int label, double sigma, double max_translation,
                             Rng& rng, std::int64_t timestamp_ms);

}  // namespace handjog
