#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "handjog/landmarks.hpp"

namespace handjog {

enum class Activation : std::uint32_t { relu = 0, tanh = 1 };

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view s);

/// Layer widths from input to output, e.g. {42, 20, 10, 8}.
struct LayerSpec {
    std::vector<int> sizes;
    Activation hidden = Activation::relu;

    /// Throws ValidationError unless there are >= 2 widths, all >= 1.
    void validate() const;
    int input_width() const { return sizes.front(); }
    int output_width() const { return sizes.back(); }
    std::size_t layer_count() const { return sizes.size() - 1; }
    bool operator==(const LayerSpec&) const = default;
};

LayerSpec default_layer_spec();
LayerSpec parse_layer_spec(std::string_view text);
std::string format_layer_spec(const LayerSpec& spec);

/// Sum over layers of (fan_in + 1) * fan_out.
std::size_t param_count(const LayerSpec& spec);

struct DenseLayer {
    int fan_in = 0;
    int fan_out = 0;
    std::vector<double> weights;  // fan_out x fan_in, row-major
    std::vector<double> bias;     // fan_out

    double& w(int row, int col) { return weights[static_cast<std::size_t>(row * fan_in + col)]; }
    double w(int row, int col) const { return weights[static_cast<std::size_t>(row * fan_in + col)]; }
    bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
    LayerSpec spec;
    std::vector<DenseLayer> layers;

    static MlpParams zeros(const LayerSpec& spec);

    /// Visits every scalar parameter, weights before biases, layer by layer.
    template <typename F>
    void for_each(F&& f) {
        for (auto& l : layers) {
            for (auto& v : l.weights) f(v);
            for (auto& v : l.bias) f(v);
        }
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& l : layers) {
            for (double v : l.weights) f(v);
            for (double v : l.bias) f(v);
        }
    }
    bool operator==(const MlpParams&) const = default;
};

/// Numerically stable softmax (max logit subtracted first).
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> values);

struct ForwardResult {
    std::vector<double> logits;
    std::vector<double> probabilities;
};

ForwardResult forward(const MlpParams& params, std::span<const double> features);

struct LossAndGrad {
    double loss = 0.0;
    MlpParams gradients;
};

/// Mean categorical cross-entropy over the batch and its exact gradient.
/// log() is clamped below at 1e-12.
LossAndGrad loss_and_grad(const MlpParams& params, std::span<const LabeledSample> batch);

double mean_loss(const MlpParams& params, std::span<const LabeledSample> samples);

/// theta - learning_rate * grad, elementwise.
MlpParams sgd_step(MlpParams params, const MlpParams& gradients, double learning_rate);

enum class InitScheme { he_uniform, xavier_uniform };

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 300;
    int batch_size = 32;
    std::uint64_t seed = 7;
    InitScheme init = InitScheme::he_uniform;

    void validate() const;
};

MlpParams init_params(const LayerSpec& spec, InitScheme scheme, std::uint64_t seed);

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    bool operator==(const EpochStats&) const = default;
};

using TrainHistory = std::vector<EpochStats>;

struct TrainResult {
    MlpParams params;
    TrainHistory history;
};

/// Seeded init, then per epoch: shuffle, mini-batch SGD, and record loss
/// and accuracy on both sets. Throws RuntimeFailure naming the epoch if
/// the loss stops being finite.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const LayerSpec& spec,
                  const TrainConfig& config);

struct EvalReport {
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::size_t total = 0;
    std::size_t correct = 0;
};

EvalReport evaluate(const MlpParams& params, const Dataset& dataset);

struct GestureEvent {
    int label = 0;
    double confidence = 0.0;
    bool operator==(const GestureEvent&) const = default;
};

/// Argmax label with its probability, or nullopt when below `threshold`.
std::optional<GestureEvent> predict(const MlpParams& params, std::span<const double> features, double threshold);
std::optional<GestureEvent> event_from_probabilities(std::span<const double> probabilities, double threshold);

// Float model file ("TGN1"); layout in docs/formats.md.
std::vector<std::uint8_t> encode_float_model(const MlpParams& params);
MlpParams decode_float_model(std::span<const std::uint8_t> bytes);
void save_float_model(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_float_model(const std::filesystem::path& path);
std::size_t float_model_header_size(const LayerSpec& spec);

}  // namespace handjog
