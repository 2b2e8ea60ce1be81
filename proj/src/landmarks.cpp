#include "handjog/landmarks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "handjog/error.hpp"

namespace handjog {

namespace {

constexpr std::array<std::string_view, kGestureCount> kGestureNames = {
    "Fist", "OpenPalm", "PointUp", "PointDown", "PointLeft", "PointRight", "Peace", "ThumbUp",
};

std::string line_error(std::size_t line, const std::string& what) {
    return "line " + std::to_string(line) + ": " + what;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string expected_header() {
    std::string h = "label";
    for (std::size_t i = 0; i < kFeatureLength; ++i) h += ",f" + std::to_string(i);
    return h;
}

}  // namespace

std::string_view to_string(Handedness h) {
    switch (h) {
        case Handedness::left: return "left";
        case Handedness::right: return "right";
        case Handedness::unknown: break;
    }
    return "unknown";
}

std::optional<Handedness> parse_handedness(std::string_view s) {
    if (s == "left") return Handedness::left;
    if (s == "right") return Handedness::right;
    if (s == "unknown") return Handedness::unknown;
    return std::nullopt;
}

std::string_view gesture_name(int id) {
    if (id < 0 || id >= kGestureCount) return "unknown";
    return kGestureNames[static_cast<std::size_t>(id)];
}

std::optional<int> gesture_id(std::string_view name) {
    for (int i = 0; i < kGestureCount; ++i) {
        if (kGestureNames[static_cast<std::size_t>(i)] == name) return i;
    }
    return std::nullopt;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
    for (const auto& s : samples) {
        if (s.label >= 0 && s.label < class_count) ++counts[static_cast<std::size_t>(s.label)];
    }
    return counts;
}

FeatureVector normalize_frame(const LandmarkFrame& frame, const NormalizeOptions& options) {
    if (frame.points.size() != kLandmarkCount) {
        throw ValidationError("frame has " + std::to_string(frame.points.size()) + " points, expected " +
                              std::to_string(kLandmarkCount));
    }
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        const auto& p = frame.points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError("frame point " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
    const Landmark wrist = frame.points[0];
    FeatureVector out{};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        out[2 * i] = frame.points[i].x - wrist.x;
        out[2 * i + 1] = frame.points[i].y - wrist.y;
    }
    if (options.max_abs_scale) {
        double m = 0.0;
        for (double v : out) m = std::max(m, std::abs(v));
        if (m > 0.0) {
            for (double& v : out) v /= m;
        }
    }
    return out;
}

std::string format_dataset_csv(const Dataset& dataset) {
    std::string out = expected_header();
    out += '\n';
    char buf[64];
    for (const auto& s : dataset.samples) {
        if (s.features.size() != kFeatureLength) {
            throw ValidationError("sample has " + std::to_string(s.features.size()) + " features, expected " +
                                  std::to_string(kFeatureLength));
        }
        out += std::to_string(s.label);
        for (double v : s.features) {
            std::snprintf(buf, sizeof buf, ",%.9g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

Dataset parse_dataset_csv(std::string_view text, int class_count) {
    Dataset ds;
    ds.class_count = class_count;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!saw_header) {
            if (line != expected_header()) throw ValidationError(line_error(line_no, "bad header"));
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != kFeatureLength + 1) {
            throw ValidationError(line_error(line_no, "expected " + std::to_string(kFeatureLength + 1) +
                                                          " fields, got " + std::to_string(fields.size())));
        }
        LabeledSample s;
        if (!parse_int(fields[0], s.label) || s.label < 0) {
            throw ValidationError(line_error(line_no, "bad label '" + std::string(fields[0]) + "'"));
        }
        if (s.label >= class_count) {
            throw ValidationError(line_error(line_no, "label " + std::to_string(s.label) + " >= class count " +
                                                          std::to_string(class_count)));
        }
        s.features.resize(kFeatureLength);
        for (std::size_t i = 0; i < kFeatureLength; ++i) {
            if (!parse_double(fields[i + 1], s.features[i])) {
                throw ValidationError(line_error(line_no, "unparsable float '" + std::string(fields[i + 1]) + "'"));
            }
        }
        ds.samples.push_back(std::move(s));
    }
    if (!saw_header) throw ValidationError("line 1: missing header");
    return ds;
}

Dataset read_dataset(const std::filesystem::path& path, int class_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_dataset_csv(ss.str(), class_count);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    const std::string text = format_dataset_csv(dataset);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write dataset '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

DatasetSplit split_dataset(const Dataset& dataset, std::size_t val_per_class, std::uint64_t seed) {
    const auto m = static_cast<std::size_t>(dataset.class_count);
    std::vector<std::vector<std::size_t>> by_class(m);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const int label = dataset.samples[i].label;
        if (label < 0 || static_cast<std::size_t>(label) >= m) {
            throw ValidationError("sample " + std::to_string(i) + " has label " + std::to_string(label) +
                                  " outside class count " + std::to_string(m));
        }
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }
    for (std::size_t c = 0; c < m; ++c) {
        if (by_class[c].size() < val_per_class) {
            throw ValidationError("class " + std::to_string(c) + " (" + std::string(gesture_name(static_cast<int>(c))) +
                                  ") has " + std::to_string(by_class[c].size()) + " samples, need " +
                                  std::to_string(val_per_class));
        }
    }
    Rng rng(seed);
    std::vector<bool> in_val(dataset.samples.size(), false);
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (std::size_t k = 0; k < val_per_class; ++k) in_val[members[k]] = true;
    }
    DatasetSplit out;
    out.train.class_count = out.val.class_count = dataset.class_count;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        (in_val[i] ? out.val : out.train).samples.push_back(dataset.samples[i]);
    }
    return out;
}

LandmarkFrame template_frame(const TemplateSet& templates, int label, std::int64_t timestamp_ms) {
    if (label < 0 || label >= kGestureCount) throw ValidationError("template label out of range");
    LandmarkFrame f;
    f.timestamp_ms = timestamp_ms;
    const auto& hand = templates.hands[static_cast<std::size_t>(label)];
    f.points.assign(hand.begin(), hand.end());
    f.handedness = Handedness::right;
    return f;
}

LandmarkFrame jittered_frame(const TemplateSet& templates, int label, double sigma, double max_translation, Rng& rng,
                             std::int64_t timestamp_ms) {
    LandmarkFrame f = template_frame(templates, label, timestamp_ms);
    for (auto& p : f.points) {
        p.x += sigma * rng.normal();
        p.y += sigma * rng.normal();
    }
    const double dx = rng.uniform(-max_translation, max_translation);
    const double dy = rng.uniform(-max_translation, max_translation);
    for (auto& p : f.points) {
        p.x += dx;
        p.y += dy;
    }
    return f;
}

Dataset generate_synthetic_dataset(const SyntheticOptions& options, const TemplateSet& templates) {
    if (options.per_class < 1) throw ValidationError("per_class must be >= 1");
    if (!(options.jitter_sigma >= 0.0) || !std::isfinite(options.jitter_sigma)) {
        throw ValidationError("jitter_sigma must be finite and >= 0");
    }
    if (!(options.max_translation >= 0.0)) throw ValidationError("max_translation must be >= 0");
    Rng rng(options.seed);
    Dataset ds;
    ds.class_count = kGestureCount;
    ds.samples.reserve(options.per_class * kGestureCount);
    for (int c = 0; c < kGestureCount; ++c) {
        for (std::size_t i = 0; i < options.per_class; ++i) {
            const LandmarkFrame f =
                jittered_frame(templates, c, options.jitter_sigma, options.max_translation, rng, 0);
            const FeatureVector v = normalize_frame(f, options.normalize);
            ds.samples.push_back({c, std::vector<double>(v.begin(), v.end())});
        }
    }
    return ds;
}

}  // namespace handjog
