#include <fstream>
#include <sstream>

#include "handjog/error.hpp"
#include "handjog/landmarks.hpp"

namespace handjog {

namespace {

// Version "hands-v2". Right hand in image coordinates (y grows downward),
// wrist at (0.5, 0.5), hand about 0.4 of the frame tall. Landmark order:
// wrist, thumb CMC..tip, then index, middle, ring and pinky MCP..tip.
const TemplateSet kDefaultTemplates = {
    "hands-v2",
    {{
    // 0 Fist
    {{{0.50000, 0.50000}, {0.43250, 0.42500}, {0.44000, 0.37250}, {0.48500, 0.35000}, {0.52250, 0.34250}, {0.45500, 0.27500}, {0.45500, 0.23000}, {0.45500, 0.25700}, {0.45500, 0.29750}, {0.48500, 0.27500}, {0.48500, 0.23000}, {0.48500, 0.25700}, {0.48500, 0.29750}, {0.51500, 0.27500}, {0.51500, 0.23000}, {0.51500, 0.25700}, {0.51500, 0.29750}, {0.54500, 0.29000}, {0.54500, 0.24500}, {0.54500, 0.27200}, {0.54500, 0.31250}}},
    // 1 OpenPalm
    {{{0.50000, 0.50000}, {0.43250, 0.42500}, {0.37970, 0.38300}, {0.33845, 0.35045}, {0.30320, 0.32240}, {0.45500, 0.27500}, {0.43820, 0.20195}, {0.42830, 0.15800}, {0.41990, 0.12140}, {0.48500, 0.27500}, {0.47885, 0.19280}, {0.47510, 0.14330}, {0.47210, 0.10295}, {0.51500, 0.27500}, {0.52055, 0.20015}, {0.52400, 0.15530}, {0.52685, 0.11795}, {0.54500, 0.29000}, {0.55835, 0.23150}, {0.56675, 0.19490}, {0.57350, 0.16565}}},
    // 2 PointUp
    {{{0.50000, 0.50000}, {0.43250, 0.42500}, {0.44000, 0.37250}, {0.48500, 0.35000}, {0.52250, 0.34250}, {0.45500, 0.27500}, {0.45500, 0.20000}, {0.45500, 0.15500}, {0.45500, 0.11750}, {0.48500, 0.27500}, {0.48500, 0.23000}, {0.48500, 0.25700}, {0.48500, 0.29750}, {0.51500, 0.27500}, {0.51500, 0.23000}, {0.51500, 0.25700}, {0.51500, 0.29750}, {0.54500, 0.29000}, {0.54500, 0.24500}, {0.54500, 0.27200}, {0.54500, 0.31250}}},
    // 3 PointDown
    {{{0.50000, 0.50000}, {0.56750, 0.57500}, {0.56000, 0.62750}, {0.51500, 0.65000}, {0.47750, 0.65750}, {0.54500, 0.72500}, {0.54500, 0.80000}, {0.54500, 0.84500}, {0.54500, 0.88250}, {0.51500, 0.72500}, {0.51500, 0.77000}, {0.51500, 0.74300}, {0.51500, 0.70250}, {0.48500, 0.72500}, {0.48500, 0.77000}, {0.48500, 0.74300}, {0.48500, 0.70250}, {0.45500, 0.71000}, {0.45500, 0.75500}, {0.45500, 0.72800}, {0.45500, 0.68750}}},
    // 4 PointLeft
    {{{0.50000, 0.50000}, {0.42500, 0.56750}, {0.37250, 0.56000}, {0.35000, 0.51500}, {0.34250, 0.47750}, {0.27500, 0.54500}, {0.20000, 0.54500}, {0.15500, 0.54500}, {0.11750, 0.54500}, {0.27500, 0.51500}, {0.23000, 0.51500}, {0.25700, 0.51500}, {0.29750, 0.51500}, {0.27500, 0.48500}, {0.23000, 0.48500}, {0.25700, 0.48500}, {0.29750, 0.48500}, {0.29000, 0.45500}, {0.24500, 0.45500}, {0.27200, 0.45500}, {0.31250, 0.45500}}},
    // 5 PointRight
    {{{0.50000, 0.50000}, {0.57500, 0.43250}, {0.62750, 0.44000}, {0.65000, 0.48500}, {0.65750, 0.52250}, {0.72500, 0.45500}, {0.80000, 0.45500}, {0.84500, 0.45500}, {0.88250, 0.45500}, {0.72500, 0.48500}, {0.77000, 0.48500}, {0.74300, 0.48500}, {0.70250, 0.48500}, {0.72500, 0.51500}, {0.77000, 0.51500}, {0.74300, 0.51500}, {0.70250, 0.51500}, {0.71000, 0.54500}, {0.75500, 0.54500}, {0.72800, 0.54500}, {0.68750, 0.54500}}},
    // 6 Peace
    {{{0.50000, 0.50000}, {0.43250, 0.42500}, {0.44000, 0.37250}, {0.48500, 0.35000}, {0.52250, 0.34250}, {0.45500, 0.27500}, {0.44015, 0.20150}, {0.43115, 0.15740}, {0.42365, 0.12065}, {0.48500, 0.27500}, {0.50135, 0.19415}, {0.51125, 0.14570}, {0.51920, 0.10595}, {0.51500, 0.27500}, {0.51500, 0.23000}, {0.51500, 0.25700}, {0.51500, 0.29750}, {0.54500, 0.29000}, {0.54500, 0.24500}, {0.54500, 0.27200}, {0.54500, 0.31250}}},
    // 7 ThumbUp
    {{{0.50000, 0.50000}, {0.42500, 0.56750}, {0.42500, 0.63500}, {0.42485, 0.68750}, {0.42485, 0.73250}, {0.27500, 0.54500}, {0.23000, 0.54500}, {0.25700, 0.54500}, {0.29750, 0.54500}, {0.27500, 0.51500}, {0.23000, 0.51500}, {0.25700, 0.51500}, {0.29750, 0.51500}, {0.27500, 0.48500}, {0.23000, 0.48500}, {0.25700, 0.48500}, {0.29750, 0.48500}, {0.29000, 0.45500}, {0.24500, 0.45500}, {0.27200, 0.45500}, {0.31250, 0.45500}}},
    }},
};

}  // namespace

const TemplateSet& default_templates() { return kDefaultTemplates; }

TemplateSet load_templates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open template file '" + path.string() + "'");
    TemplateSet set;
    std::array<bool, kGestureCount> seen{};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (line.rfind("version", 0) == 0) {
            std::string kw;
            ls >> kw >> set.version;
            continue;
        }
        int id = -1;
        if (!(ls >> id) || id < 0 || id >= kGestureCount) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": bad class id");
        }
        auto& hand = set.hands[static_cast<std::size_t>(id)];
        for (auto& p : hand) {
            if (!(ls >> p.x >> p.y)) {
                throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": expected 42 coordinates");
            }
        }
        std::string rest;
        if (ls >> rest) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": trailing data");
        }
        seen[static_cast<std::size_t>(id)] = true;
    }
    for (int c = 0; c < kGestureCount; ++c) {
        if (!seen[static_cast<std::size_t>(c)]) {
            throw ValidationError(path.string() + ": missing template for class " + std::to_string(c));
        }
    }
    if (set.version.empty()) set.version = path.filename().string();
    return set;
}

}  // namespace handjog
