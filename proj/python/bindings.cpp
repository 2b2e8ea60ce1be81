// Thin Python surface over the core: data, training, int8 models,
// kinematics and headless scenarios.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "handjog/compress.hpp"
#include "handjog/error.hpp"
#include "handjog/landmarks.hpp"
#include "handjog/scenario.hpp"
#include "handjog/tinynet.hpp"
#include "handjog/ur5.hpp"

namespace py = pybind11;
using namespace handjog;

namespace {

LandmarkFrame frame_from(const std::vector<std::pair<double, double>>& points) {
    LandmarkFrame f;
    for (const auto& [x, y] : points) f.points.push_back({x, y});
    return f;
}

std::vector<double> checked_features(const std::vector<double>& features, const LayerSpec& spec) {
    if (features.size() != static_cast<std::size_t>(spec.input_width()))
        throw ValidationError("expected " + std::to_string(spec.input_width()) + " features, got " +
                              std::to_string(features.size()));
    return features;
}

ScenarioScript script_named(const std::string& name) {
    if (name == "pick-place") return canonical_pick_place();
    if (name == "limit-seek") return limit_seek();
    throw ValidationError("unknown builtin scenario '" + name + "'");
}

py::dict scenario_summary(const ScenarioResult& r) {
    py::dict d;
    d["status"] = std::string(to_string(r.verdict.status));
    d["goals_reached"] = r.verdict.goals_reached;
    d["safety_events"] = r.verdict.safety_events;
    d["audit_ok"] = r.audit.ok();
    d["states"] = r.log.states.size();
    std::vector<Vec3> ee;
    ee.reserve(r.log.states.size());
    for (const auto& s : r.log.states) ee.push_back(s.ee);
    d["ee"] = ee;
    d["lines"] = r.log.lines;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "handjog core";

    // Translators run newest first, so the base class goes in first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

    m.attr("GESTURE_COUNT") = kGestureCount;
    m.def("gesture_names", [] {
        std::vector<std::string> names;
        for (int i = 0; i < kGestureCount; ++i) names.emplace_back(gesture_name(i));
        return names;
    });
    m.def(
        "normalize_frame",
        [](const std::vector<std::pair<double, double>>& points, bool max_abs_scale) {
            NormalizeOptions o;
            o.max_abs_scale = max_abs_scale;
            return normalize_frame(frame_from(points), o);
        },
        py::arg("points"), py::arg("max_abs_scale") = false);
    m.def(
        "template_points",
        [](int label) {
            std::vector<std::pair<double, double>> out;
            for (const auto& p : template_frame(default_templates(), label).points) out.emplace_back(p.x, p.y);
            return out;
        },
        py::arg("label"));

    py::class_<Dataset>(m, "Dataset")
        .def("__len__", &Dataset::size)
        .def_property_readonly("features",
                               [](const Dataset& d) {
                                   std::vector<std::vector<double>> out;
                                   for (const auto& s : d.samples) out.push_back(s.features);
                                   return out;
                               })
        .def_property_readonly("labels",
                               [](const Dataset& d) {
                                   std::vector<int> out;
                                   for (const auto& s : d.samples) out.push_back(s.label);
                                   return out;
                               })
        .def("class_counts", &Dataset::class_counts)
        .def("to_csv", &format_dataset_csv)
        .def_static("from_csv", [](const std::string& text) { return parse_dataset_csv(text); })
        .def("save", [](const Dataset& d, const std::filesystem::path& p) { write_dataset(d, p); })
        .def_static("load", [](const std::filesystem::path& p) { return read_dataset(p); });

    m.def(
        "generate_dataset",
        [](std::size_t per_class, double sigma, std::uint64_t seed) {
            SyntheticOptions o;
            o.per_class = per_class;
            o.jitter_sigma = sigma;
            o.seed = seed;
            return generate_synthetic_dataset(o);
        },
        py::arg("per_class") = 200, py::arg("sigma") = 0.02, py::arg("seed") = 7);
    m.def(
        "split_dataset",
        [](const Dataset& d, std::size_t val_per_class, std::uint64_t seed) {
            auto s = split_dataset(d, val_per_class, seed);
            return py::make_tuple(std::move(s.train), std::move(s.val));
        },
        py::arg("dataset"), py::arg("val_per_class") = 50, py::arg("seed") = 7);

    py::class_<MlpParams>(m, "FloatModel")
        .def_property_readonly("spec", [](const MlpParams& p) { return format_layer_spec(p.spec); })
        .def_property_readonly("param_count", [](const MlpParams& p) { return param_count(p.spec); })
        .def("predict_proba",
             [](const MlpParams& p, const std::vector<double>& f) {
                 return forward(p, checked_features(f, p.spec)).probabilities;
             })
        .def("evaluate", [](const MlpParams& p, const Dataset& d) { return evaluate(p, d).accuracy; })
        .def("to_bytes",
             [](const MlpParams& p) {
                 const auto b = encode_float_model(p);
                 return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
             })
        .def_static("from_bytes",
                    [](const py::bytes& b) {
                        const std::string s = b;
                        return decode_float_model(
                            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
                    })
        .def("save", [](const MlpParams& p, const std::filesystem::path& path) { save_float_model(p, path); })
        .def_static("load", [](const std::filesystem::path& path) { return load_float_model(path); })
        .def("__eq__", [](const MlpParams& a, const MlpParams& b) { return a == b; });

    m.def(
        "train",
        [](const Dataset& train_set, const Dataset& val_set, const std::string& spec, int epochs,
           double learning_rate, int batch_size, std::uint64_t seed) {
            TrainConfig c;
            c.epochs = epochs;
            c.learning_rate = learning_rate;
            c.batch_size = batch_size;
            c.seed = seed;
            py::gil_scoped_release release;
            auto r = train(train_set, val_set, parse_layer_spec(spec), c);
            std::vector<double> val_acc;
            for (const auto& e : r.history) val_acc.push_back(e.val_accuracy);
            return std::make_pair(std::move(r.params), std::move(val_acc));
        },
        py::arg("train_set"), py::arg("val_set"), py::arg("spec") = "42,20,10,8", py::arg("epochs") = 300,
        py::arg("learning_rate") = 0.01, py::arg("batch_size") = 32, py::arg("seed") = 7);

    py::class_<QuantizedModel>(m, "QuantizedModel")
        .def("predict_proba",
             [](const QuantizedModel& q, const std::vector<double>& f) {
                 return quantized_forward(q, checked_features(f, q.spec)).probabilities;
             })
        .def("evaluate", [](const QuantizedModel& q, const Dataset& d) { return evaluate_quantized(q, d).accuracy; })
        .def("to_bytes",
             [](const QuantizedModel& q) {
                 const auto b = serialize(q);
                 return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
             })
        .def_static("from_bytes",
                    [](const py::bytes& b) {
                        const std::string s = b;
                        return deserialize(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
                    })
        .def("save",
             [](const QuantizedModel& q, const std::filesystem::path& path) { save_quantized_model(q, path); })
        .def_static("load", [](const std::filesystem::path& path) { return load_quantized_model(path); });

    m.def(
        "quantize",
        [](const MlpParams& p, const Dataset& calibration, double prune) {
            PruneConfig pc;
            pc.target_sparsity = prune;
            return quantize(prune > 0.0 ? prune_magnitude(p, pc) : p, calibration);
        },
        py::arg("model"), py::arg("calibration"), py::arg("prune") = 0.0);
    m.def("agreement", &agreement_rate, py::arg("model"), py::arg("quantized"), py::arg("dataset"));

    m.def("home_joints", &home_joints);
    m.def("forward_kinematics", [](const Joints& q) {
        const Pose p = forward_kinematics(q);
        return py::make_tuple(Eigen::Vector3d(p.position), Eigen::Matrix3d(p.rotation));
    });
    m.def("jacobian", [](const Joints& q) { return Jacobian(jacobian(q)); });

    m.def(
        "run_scenario",
        [](const std::string& builtin, const std::string& text, std::uint64_t seed) {
            if (builtin.empty() == text.empty()) throw ValidationError("give exactly one of builtin= or text=");
            const ScenarioScript s = text.empty() ? script_named(builtin) : parse_scenario(text);
            if (s.input == InputMode::frames)
                throw ValidationError("frame-input scenarios need a classifier; use 'input holds'");
            ScenarioOptions o;
            o.seed = seed;
            return scenario_summary(run_scenario(s, nullptr, o));
        },
        py::arg("builtin") = "", py::arg("text") = "", py::arg("seed") = 7);
}
