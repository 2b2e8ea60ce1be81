#include "handjog/compress.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "handjog/bytes.hpp"
#include "handjog/error.hpp"

namespace handjog {

namespace {

std::int8_t clamp_i8(double v) { return static_cast<std::int8_t>(std::clamp(v, -128.0, 127.0)); }

std::int32_t clamp_i32(double v) {
    return static_cast<std::int32_t>(std::clamp(v, static_cast<double>(std::numeric_limits<std::int32_t>::min()),
                                                static_cast<double>(std::numeric_limits<std::int32_t>::max())));
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
    }
    return x;
}

}  // namespace

MlpParams prune_magnitude(const MlpParams& params, const PruneConfig& config) {
    if (!(config.target_sparsity >= 0.0 && config.target_sparsity < 1.0)) {
        throw ValidationError("target_sparsity must be in [0, 1)");
    }
    MlpParams out = params;
    for (auto& layer : out.layers) {
        auto& w = layer.weights;
        const auto k = static_cast<std::size_t>(std::floor(config.target_sparsity * static_cast<double>(w.size())));
        if (k == 0) continue;
        std::vector<std::size_t> idx(w.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(w[a]) < std::abs(w[b]); });
        for (std::size_t i = 0; i < k; ++i) w[idx[i]] = 0.0;
    }
    return out;
}

double weight_sparsity(const MlpParams& params) {
    std::size_t zeros = 0, total = 0;
    for (const auto& l : params.layers) {
        total += l.weights.size();
        zeros += static_cast<std::size_t>(std::count(l.weights.begin(), l.weights.end(), 0.0));
    }
    return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

QuantTensor quantize_symmetric(std::span<const double> values) {
    double max_abs = 0.0;
    for (double v : values) max_abs = std::max(max_abs, std::abs(v));
    QuantTensor t;
    t.zero_point = 0;
    // Degenerate all-zero tensor: any scale represents it; use 1.
    t.scale = max_abs > 0.0 ? static_cast<float>(max_abs / 127.0) : 1.0f;
    t.data.reserve(values.size());
    for (double v : values) {
        t.data.push_back(static_cast<std::int8_t>(std::clamp(std::nearbyint(v / t.scale), -127.0, 127.0)));
    }
    return t;
}

ActivationQuant activation_quant_from_range(double min, double max) {
    min = std::min(min, 0.0);
    max = std::max(max, 0.0);
    ActivationQuant q;
    if (!(max > min)) return q;
    q.scale = static_cast<float>((max - min) / 255.0);
    q.zero_point = static_cast<std::int32_t>(std::clamp(std::nearbyint(-128.0 - min / q.scale), -128.0, 127.0));
    return q;
}

std::int8_t quantize_value(double real, const ActivationQuant& q) {
    return clamp_i8(std::nearbyint(real / q.scale) + q.zero_point);
}

QuantizedModel quantize(const MlpParams& params, const Dataset& calibration) {
    if (calibration.empty()) throw ValidationError("calibration set is empty");
    params.spec.validate();
    const std::size_t n_layers = params.layers.size();

    // Range of every layer input over the calibration set, float path.
    std::vector<double> lo(n_layers, std::numeric_limits<double>::infinity());
    std::vector<double> hi(n_layers, -std::numeric_limits<double>::infinity());
    for (const auto& s : calibration.samples) {
        if (static_cast<int>(s.features.size()) != params.spec.input_width()) {
            throw ValidationError("calibration feature width does not match the model");
        }
        std::vector<double> h = s.features;
        for (std::size_t l = 0; l < n_layers; ++l) {
            for (double v : h) {
                lo[l] = std::min(lo[l], v);
                hi[l] = std::max(hi[l], v);
            }
            const auto& layer = params.layers[l];
            std::vector<double> next(static_cast<std::size_t>(layer.fan_out));
            for (int r = 0; r < layer.fan_out; ++r) {
                double acc = layer.bias[static_cast<std::size_t>(r)];
                for (int c = 0; c < layer.fan_in; ++c) acc += layer.w(r, c) * h[static_cast<std::size_t>(c)];
                next[static_cast<std::size_t>(r)] =
                    l + 1 < n_layers ? apply_activation(params.spec.hidden, acc) : acc;
            }
            h = std::move(next);
        }
    }

    QuantizedModel q;
    q.spec = params.spec;
    for (std::size_t l = 0; l < n_layers; ++l) {
        q.inputs.push_back(activation_quant_from_range(lo[l], hi[l]));
        const auto& layer = params.layers[l];
        QuantizedLayer ql;
        ql.fan_in = layer.fan_in;
        ql.fan_out = layer.fan_out;
        ql.weights = quantize_symmetric(layer.weights);
        const double bias_scale = static_cast<double>(q.inputs[l].scale) * ql.weights.scale;
        for (double b : layer.bias) ql.bias.push_back(clamp_i32(std::nearbyint(b / bias_scale)));
        q.layers.push_back(std::move(ql));
    }
    return q;
}

QuantizedOutput quantized_forward(const QuantizedModel& model, std::span<const double> features) {
    if (model.layers.empty()) throw ValidationError("quantized model has no layers");
    if (static_cast<int>(features.size()) != model.layers.front().fan_in) {
        throw ValidationError("feature length " + std::to_string(features.size()) + " does not match input width " +
                              std::to_string(model.layers.front().fan_in));
    }
    const std::size_t n_layers = model.layers.size();
    std::vector<std::int8_t> x(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) x[i] = quantize_value(features[i], model.inputs[0]);

    QuantizedOutput out;
    std::vector<std::int32_t> acc;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const QuantizedLayer& layer = model.layers[l];
        const ActivationQuant& in_q = model.inputs[l];
        acc.assign(layer.bias.begin(), layer.bias.end());
        for (int r = 0; r < layer.fan_out; ++r) {
            const std::int8_t* row = layer.weights.data.data() + static_cast<std::size_t>(r * layer.fan_in);
            std::int32_t sum = 0;
            for (int c = 0; c < layer.fan_in; ++c) {
                sum += static_cast<std::int32_t>(row[c]) * (static_cast<std::int32_t>(x[static_cast<std::size_t>(c)]) -
                                                            in_q.zero_point);
            }
            acc[static_cast<std::size_t>(r)] += sum;
        }
        const double acc_scale = static_cast<double>(in_q.scale) * layer.weights.scale;
        if (l + 1 == n_layers) {
            out.logits.resize(acc.size());
            for (std::size_t i = 0; i < acc.size(); ++i) out.logits[i] = acc[i] * acc_scale;
            break;
        }
        const ActivationQuant& out_q = model.inputs[l + 1];
        x.resize(acc.size());
        for (std::size_t i = 0; i < acc.size(); ++i) {
            x[i] = quantize_value(apply_activation(model.spec.hidden, acc[i] * acc_scale), out_q);
        }
    }
    out.probabilities = softmax(out.logits);
    const int label = argmax(out.probabilities);
    out.event = {label, out.probabilities[static_cast<std::size_t>(label)]};
    return out;
}

double agreement_rate(const MlpParams& params, const QuantizedModel& model, const Dataset& dataset) {
    if (dataset.empty()) throw ValidationError("agreement_rate needs a non-empty dataset");
    std::size_t agree = 0;
    for (const auto& s : dataset.samples) {
        const int f = argmax(forward(params, s.features).probabilities);
        const int q = argmax(quantized_forward(model, s.features).probabilities);
        if (f == q) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(dataset.size());
}

EvalReport evaluate_quantized(const QuantizedModel& model, const Dataset& dataset) {
    const auto m = static_cast<std::size_t>(model.spec.output_width());
    EvalReport r;
    r.confusion.assign(m, std::vector<std::size_t>(m, 0));
    for (const auto& s : dataset.samples) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= m) throw ValidationError("label outside output width");
        const int pred = quantized_forward(model, s.features).event.label;
        ++r.confusion[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)];
        if (pred == s.label) ++r.correct;
        ++r.total;
    }
    r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
    return r;
}

namespace {
constexpr char kQuantMagic[4] = {'T', 'G', 'Q', '1'};
}

std::vector<std::uint8_t> serialize(const QuantizedModel& model) {
    model.spec.validate();
    if (model.layers.size() != model.spec.layer_count() || model.inputs.size() != model.layers.size()) {
        throw ValidationError("quantized model shape does not match its spec");
    }
    ByteWriter w;
    w.raw(kQuantMagic, 4);
    w.u32(static_cast<std::uint32_t>(model.spec.sizes.size()));
    for (int s : model.spec.sizes) w.u32(static_cast<std::uint32_t>(s));
    w.u32(static_cast<std::uint32_t>(model.spec.hidden));
    for (const auto& l : model.layers) {
        w.f32(l.weights.scale);
        w.i32(l.weights.zero_point);
    }
    for (const auto& a : model.inputs) {
        w.f32(a.scale);
        w.i32(a.zero_point);
    }
    for (const auto& l : model.layers) {
        for (std::int8_t v : l.weights.data) w.i8(v);
    }
    for (const auto& l : model.layers) {
        for (std::int32_t v : l.bias) w.i32(v);
    }
    return w.take();
}

QuantizedModel deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kQuantMagic, 4) != 0) throw ValidationError("bad magic: not a TGQ1 quantized model");
    const std::uint32_t count = r.u32();
    if (count < 2 || count > 64) throw ValidationError("implausible layer count " + std::to_string(count));
    QuantizedModel q;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t width = r.u32();
        if (width < 1 || width > 1u << 16) throw ValidationError("implausible layer width");
        q.spec.sizes.push_back(static_cast<int>(width));
    }
    const std::uint32_t act = r.u32();
    if (act > static_cast<std::uint32_t>(Activation::tanh)) throw ValidationError("unknown activation tag");
    q.spec.hidden = static_cast<Activation>(act);
    const std::size_t n_layers = q.spec.layer_count();
    q.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        auto& ql = q.layers[l];
        ql.fan_in = q.spec.sizes[l];
        ql.fan_out = q.spec.sizes[l + 1];
        ql.weights.scale = r.f32();
        ql.weights.zero_point = r.i32();
        if (!(ql.weights.scale > 0.0f) || !std::isfinite(ql.weights.scale)) throw ValidationError("bad weight scale");
    }
    q.inputs.resize(n_layers);
    for (auto& a : q.inputs) {
        a.scale = r.f32();
        a.zero_point = r.i32();
        if (!(a.scale > 0.0f) || !std::isfinite(a.scale)) throw ValidationError("bad activation scale");
        if (a.zero_point < -128 || a.zero_point > 127) throw ValidationError("activation zero point out of range");
    }
    for (auto& ql : q.layers) {
        ql.weights.data.resize(static_cast<std::size_t>(ql.fan_in * ql.fan_out));
        for (auto& v : ql.weights.data) v = r.i8();
    }
    for (auto& ql : q.layers) {
        ql.bias.resize(static_cast<std::size_t>(ql.fan_out));
        for (auto& v : ql.bias) v = r.i32();
    }
    if (!r.at_end()) throw ValidationError("trailing bytes after quantized model payload");
    return q;
}

void save_quantized_model(const QuantizedModel& model, const std::filesystem::path& path) {
    write_file_bytes(path, serialize(model));
}

QuantizedModel load_quantized_model(const std::filesystem::path& path) {
    try {
        return deserialize(read_file_bytes(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::size_t model_size_bytes(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw ValidationError("cannot stat '" + path.string() + "': " + ec.message());
    return static_cast<std::size_t>(size);
}

}  // namespace handjog
