#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "handjog/landmarks.hpp"
#include "handjog/tinynet.hpp"

namespace handjog {

struct PruneConfig {
    /// Fraction of each weight matrix (smallest |w| first) set to zero.
    double target_sparsity = 0.0;
};

/// Zeroes floor(sparsity * size) smallest-magnitude entries of every weight
/// matrix; ties go to the lower index. Biases are kept.
MlpParams prune_magnitude(const MlpParams& params, const PruneConfig& config);

/// Fraction of exactly-zero weights across all weight matrices.
double weight_sparsity(const MlpParams& params);

/// Affine int8 tensor: real = scale * (q - zero_point).
struct QuantTensor {
    std::vector<std::int8_t> data;
    float scale = 1.0f;
    std::int32_t zero_point = 0;

    double dequantize(std::size_t i) const { return static_cast<double>(scale) * (data[i] - zero_point); }
    bool operator==(const QuantTensor&) const = default;
};

/// Symmetric per-tensor quantization: zero_point 0, scale max|w| / 127
/// (scale 1 for an all-zero tensor), round half to even.
QuantTensor quantize_symmetric(std::span<const double> values);

struct ActivationQuant {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    bool operator==(const ActivationQuant&) const = default;
};

/// Affine int8 parameters covering [min, max] (widened to include 0).
ActivationQuant activation_quant_from_range(double min, double max);
std::int8_t quantize_value(double real, const ActivationQuant& q);

struct QuantizedLayer {
    int fan_in = 0;
    int fan_out = 0;
    QuantTensor weights;             // fan_out x fan_in, row-major
    std::vector<std::int32_t> bias;  // at scale input.scale * weights.scale
    bool operator==(const QuantizedLayer&) const = default;
};

struct QuantizedModel {
    LayerSpec spec;
    std::vector<QuantizedLayer> layers;
    /// inputs[l] quantizes the input of layer l (inputs[0] is the feature
    /// vector). The last layer's int32 accumulator is dequantized directly.
    std::vector<ActivationQuant> inputs;
    bool operator==(const QuantizedModel&) const = default;
};

/// Full-integer recipe: symmetric int8 weights, min/max calibrated int8
/// activations, int32 biases.
QuantizedModel quantize(const MlpParams& params, const Dataset& calibration);

struct QuantizedOutput {
    std::vector<double> logits;
    std::vector<double> probabilities;
    GestureEvent event;
};

/// Integer affine layers with requantization between them; final logits
/// dequantized and softmaxed in double. Pure and thread-safe.
QuantizedOutput quantized_forward(const QuantizedModel& model, std::span<const double> features);

double agreement_rate(const MlpParams& params, const QuantizedModel& model, const Dataset& dataset);

EvalReport evaluate_quantized(const QuantizedModel& model, const Dataset& dataset);

// Quantized model file ("TGQ1"); layout in docs/formats.md.
std::vector<std::uint8_t> serialize(const QuantizedModel& model);
QuantizedModel deserialize(std::span<const std::uint8_t> bytes);
void save_quantized_model(const QuantizedModel& model, const std::filesystem::path& path);
QuantizedModel load_quantized_model(const std::filesystem::path& path);
std::size_t model_size_bytes(const std::filesystem::path& path);

/// Budget for the deployed quantized model file.
inline constexpr std::size_t kQuantizedSizeBudget = 7168;

}  // namespace handjog
