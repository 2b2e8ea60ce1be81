#include "handjog/tinynet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "handjog/bytes.hpp"
#include "handjog/error.hpp"
#include "handjog/random.hpp"

namespace handjog {

namespace {

constexpr double kLogClamp = 1e-12;

double activate(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
    }
    return x;
}

double activate_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - post * post;
    }
    return 1.0;
}

void check_input(const MlpParams& params, std::span<const double> features) {
    if (params.layers.empty()) throw ValidationError("model has no layers");
    if (static_cast<int>(features.size()) != params.layers.front().fan_in) {
        throw ValidationError("feature length " + std::to_string(features.size()) + " does not match input width " +
                              std::to_string(params.layers.front().fan_in));
    }
}

// Pre-activations and activations of every layer for one input.
struct Trace {
    std::vector<std::vector<double>> pre;   // per layer
    std::vector<std::vector<double>> post;  // post[0] = input, post[l + 1] = output of layer l
};

Trace run(const MlpParams& params, std::span<const double> x) {
    Trace t;
    const std::size_t n = params.layers.size();
    t.pre.resize(n);
    t.post.resize(n + 1);
    t.post[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < n; ++l) {
        const DenseLayer& layer = params.layers[l];
        const auto& in = t.post[l];
        auto& a = t.pre[l];
        a.assign(layer.bias.begin(), layer.bias.end());
        for (int r = 0; r < layer.fan_out; ++r) {
            const double* row = layer.weights.data() + static_cast<std::size_t>(r * layer.fan_in);
            double acc = a[static_cast<std::size_t>(r)];
            for (int c = 0; c < layer.fan_in; ++c) acc += row[c] * in[static_cast<std::size_t>(c)];
            a[static_cast<std::size_t>(r)] = acc;
        }
        auto& h = t.post[l + 1];
        if (l + 1 == n) {
            h = a;
        } else {
            h.resize(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) h[i] = activate(params.spec.hidden, a[i]);
        }
    }
    return t;
}

double sample_loss(std::span<const double> probabilities, int label) {
    return -std::log(std::max(probabilities[static_cast<std::size_t>(label)], kLogClamp));
}

void check_label(const MlpParams& params, int label) {
    if (label < 0 || label >= params.spec.output_width()) {
        throw ValidationError("label " + std::to_string(label) + " outside output width " +
                              std::to_string(params.spec.output_width()));
    }
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
    }
    return "relu";
}

std::optional<Activation> parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    return std::nullopt;
}

void LayerSpec::validate() const {
    if (sizes.size() < 2) throw ValidationError("layer spec needs at least 2 widths");
    for (int s : sizes) {
        if (s < 1) throw ValidationError("layer widths must be >= 1");
    }
}

LayerSpec default_layer_spec() { return LayerSpec{{42, 20, 10, 8}, Activation::relu}; }

LayerSpec parse_layer_spec(std::string_view text) {
    LayerSpec spec;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view field = text.substr(pos, end - pos);
        int v = 0;
        auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (field.empty() || ec != std::errc() || p != field.data() + field.size()) {
            throw ValidationError("bad layer spec '" + std::string(text) + "'");
        }
        spec.sizes.push_back(v);
        pos = end + 1;
    }
    spec.validate();
    return spec;
}

std::string format_layer_spec(const LayerSpec& spec) {
    std::string out;
    for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(spec.sizes[i]);
    }
    return out;
}

std::size_t param_count(const LayerSpec& spec) {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
        total += static_cast<std::size_t>(spec.sizes[l] + 1) * static_cast<std::size_t>(spec.sizes[l + 1]);
    }
    return total;
}

MlpParams MlpParams::zeros(const LayerSpec& spec) {
    spec.validate();
    MlpParams p;
    p.spec = spec;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        DenseLayer layer;
        layer.fan_in = spec.sizes[l];
        layer.fan_out = spec.sizes[l + 1];
        layer.weights.assign(static_cast<std::size_t>(layer.fan_in * layer.fan_out), 0.0);
        layer.bias.assign(static_cast<std::size_t>(layer.fan_out), 0.0);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

int argmax(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

ForwardResult forward(const MlpParams& params, std::span<const double> features) {
    check_input(params, features);
    Trace t = run(params, features);
    ForwardResult r;
    r.logits = std::move(t.post.back());
    r.probabilities = softmax(r.logits);
    return r;
}

LossAndGrad loss_and_grad(const MlpParams& params, std::span<const LabeledSample> batch) {
    if (batch.empty()) throw ValidationError("loss_and_grad needs a non-empty batch");
    LossAndGrad out;
    out.gradients = MlpParams::zeros(params.spec);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const std::size_t n_layers = params.layers.size();

    std::vector<double> delta;
    std::vector<double> prev_delta;
    for (const auto& sample : batch) {
        check_input(params, sample.features);
        check_label(params, sample.label);
        const Trace t = run(params, sample.features);
        const std::vector<double> p = softmax(t.post.back());
        const auto y = static_cast<std::size_t>(sample.label);
        out.loss += sample_loss(p, sample.label);

        // d(loss)/d(logits); zero when the clamp is active because the
        // clamped loss is constant there.
        delta.assign(p.size(), 0.0);
        if (p[y] >= kLogClamp) {
            for (std::size_t j = 0; j < p.size(); ++j) delta[j] = p[j] * inv_n;
            delta[y] -= inv_n;
        }

        for (std::size_t li = n_layers; li-- > 0;) {
            const DenseLayer& layer = params.layers[li];
            DenseLayer& g = out.gradients.layers[li];
            const auto& in = t.post[li];
            for (int r = 0; r < layer.fan_out; ++r) {
                const double d = delta[static_cast<std::size_t>(r)];
                if (d == 0.0) continue;
                double* grow = g.weights.data() + static_cast<std::size_t>(r * layer.fan_in);
                for (int c = 0; c < layer.fan_in; ++c) grow[c] += d * in[static_cast<std::size_t>(c)];
                g.bias[static_cast<std::size_t>(r)] += d;
            }
            if (li == 0) break;
            prev_delta.assign(static_cast<std::size_t>(layer.fan_in), 0.0);
            for (int r = 0; r < layer.fan_out; ++r) {
                const double d = delta[static_cast<std::size_t>(r)];
                if (d == 0.0) continue;
                const double* row = layer.weights.data() + static_cast<std::size_t>(r * layer.fan_in);
                for (int c = 0; c < layer.fan_in; ++c) prev_delta[static_cast<std::size_t>(c)] += row[c] * d;
            }
            const auto& pre = t.pre[li - 1];
            const auto& post = t.post[li];
            for (std::size_t c = 0; c < prev_delta.size(); ++c) {
                prev_delta[c] *= activate_grad(params.spec.hidden, pre[c], post[c]);
            }
            std::swap(delta, prev_delta);
        }
    }
    out.loss *= inv_n;
    return out;
}

double mean_loss(const MlpParams& params, std::span<const LabeledSample> samples) {
    if (samples.empty()) throw ValidationError("mean_loss needs samples");
    double total = 0.0;
    for (const auto& s : samples) {
        check_label(params, s.label);
        const auto r = forward(params, s.features);
        total += sample_loss(r.probabilities, s.label);
    }
    return total / static_cast<double>(samples.size());
}

MlpParams sgd_step(MlpParams params, const MlpParams& gradients, double learning_rate) {
    if (params.layers.size() != gradients.layers.size()) throw ValidationError("gradient shape mismatch");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        const auto& g = gradients.layers[l];
        if (p.weights.size() != g.weights.size() || p.bias.size() != g.bias.size()) {
            throw ValidationError("gradient shape mismatch");
        }
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= learning_rate * g.weights[i];
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= learning_rate * g.bias[i];
    }
    return params;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

MlpParams init_params(const LayerSpec& spec, InitScheme scheme, std::uint64_t seed) {
    MlpParams p = MlpParams::zeros(spec);
    Rng rng(seed);
    for (auto& layer : p.layers) {
        const double limit = scheme == InitScheme::he_uniform
                                 ? std::sqrt(6.0 / layer.fan_in)
                                 : std::sqrt(6.0 / (layer.fan_in + layer.fan_out));
        for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    }
    return p;
}

namespace {

struct SetStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

SetStats measure(const MlpParams& params, const Dataset& ds) {
    SetStats s;
    std::size_t correct = 0;
    for (const auto& sample : ds.samples) {
        const auto r = forward(params, sample.features);
        s.loss += sample_loss(r.probabilities, sample.label);
        if (argmax(r.probabilities) == sample.label) ++correct;
    }
    const double n = static_cast<double>(ds.samples.size());
    s.loss /= n;
    s.accuracy = static_cast<double>(correct) / n;
    return s;
}

void check_dataset(const Dataset& ds, const LayerSpec& spec, const char* name) {
    if (ds.empty()) throw ValidationError(std::string(name) + " set is empty");
    for (const auto& s : ds.samples) {
        if (static_cast<int>(s.features.size()) != spec.input_width()) {
            throw ValidationError(std::string(name) + " set feature width does not match the layer spec");
        }
        if (s.label < 0 || s.label >= spec.output_width()) {
            throw ValidationError(std::string(name) + " set has a label outside the output width");
        }
    }
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, const LayerSpec& spec,
                  const TrainConfig& config) {
    spec.validate();
    config.validate();
    check_dataset(train_set, spec, "train");
    check_dataset(val_set, spec, "validation");

    TrainResult result;
    result.params = init_params(spec, config.init, config.seed);
    // Separate stream for shuffling so changing the init scheme does not
    // change the batch order.
    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<LabeledSample> batch;
    const auto batch_size = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(start + batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set.samples[order[i]]);
            const LossAndGrad lg = loss_and_grad(result.params, batch);
            if (!std::isfinite(lg.loss)) {
                throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch));
            }
            result.params = sgd_step(std::move(result.params), lg.gradients, config.learning_rate);
        }
        const SetStats tr = measure(result.params, train_set);
        const SetStats va = measure(result.params, val_set);
        if (!std::isfinite(tr.loss) || !std::isfinite(va.loss)) {
            throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch));
        }
        result.history.push_back({tr.loss, tr.accuracy, va.loss, va.accuracy});
    }
    return result;
}

EvalReport evaluate(const MlpParams& params, const Dataset& dataset) {
    const auto m = static_cast<std::size_t>(params.spec.output_width());
    EvalReport r;
    r.confusion.assign(m, std::vector<std::size_t>(m, 0));
    for (const auto& s : dataset.samples) {
        check_label(params, s.label);
        const auto out = forward(params, s.features);
        const int pred = argmax(out.probabilities);
        ++r.confusion[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)];
        if (pred == s.label) ++r.correct;
        ++r.total;
    }
    r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
    return r;
}

std::optional<GestureEvent> event_from_probabilities(std::span<const double> probabilities, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must be in [0, 1]");
    const int label = argmax(probabilities);
    const double conf = probabilities[static_cast<std::size_t>(label)];
    if (conf < threshold) return std::nullopt;
    return GestureEvent{label, conf};
}

std::optional<GestureEvent> predict(const MlpParams& params, std::span<const double> features, double threshold) {
    const auto r = forward(params, features);
    return event_from_probabilities(r.probabilities, threshold);
}

namespace {
constexpr char kFloatMagic[4] = {'T', 'G', 'N', '1'};
}

std::size_t float_model_header_size(const LayerSpec& spec) { return 4 + 4 + 4 * spec.sizes.size() + 4; }

std::vector<std::uint8_t> encode_float_model(const MlpParams& params) {
    params.spec.validate();
    ByteWriter w;
    w.raw(kFloatMagic, 4);
    w.u32(static_cast<std::uint32_t>(params.spec.sizes.size()));
    for (int s : params.spec.sizes) w.u32(static_cast<std::uint32_t>(s));
    w.u32(static_cast<std::uint32_t>(params.spec.hidden));
    for (const auto& l : params.layers) {
        for (double v : l.weights) w.f32(static_cast<float>(v));
        for (double v : l.bias) w.f32(static_cast<float>(v));
    }
    return w.take();
}

MlpParams decode_float_model(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kFloatMagic, 4) != 0) throw ValidationError("bad magic: not a TGN1 float model");
    const std::uint32_t count = r.u32();
    if (count < 2 || count > 64) throw ValidationError("implausible layer count " + std::to_string(count));
    LayerSpec spec;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t width = r.u32();
        if (width < 1 || width > 1u << 16) throw ValidationError("implausible layer width");
        spec.sizes.push_back(static_cast<int>(width));
    }
    const std::uint32_t act = r.u32();
    if (act > static_cast<std::uint32_t>(Activation::tanh)) throw ValidationError("unknown activation tag");
    spec.hidden = static_cast<Activation>(act);
    MlpParams p = MlpParams::zeros(spec);
    for (auto& l : p.layers) {
        for (double& v : l.weights) v = r.f32();
        for (double& v : l.bias) v = r.f32();
    }
    if (!r.at_end()) throw ValidationError("trailing bytes after float model payload");
    return p;
}

void save_float_model(const MlpParams& params, const std::filesystem::path& path) {
    write_file_bytes(path, encode_float_model(params));
}

MlpParams load_float_model(const std::filesystem::path& path) {
    try {
        return decode_float_model(read_file_bytes(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace handjog
