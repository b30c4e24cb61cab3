#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mats {

enum class Activation { identity, tanh, relu };

Activation parse_activation(std::string_view name);

struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;    // out_dim
  Activation activation = Activation::identity;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Fully connected network. Consecutive layers must chain: out_dim(k) == in_dim(k+1).
struct MLPParams {
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;

  std::size_t in_dim() const { return layers.front().in_dim; }
  std::size_t out_dim() const { return layers.back().out_dim; }
  std::size_t parameter_count() const;
  // Throws InvalidArgument if the layer chain or buffer sizes are inconsistent.
  void validate() const;

  friend bool operator==(const MLPParams&, const MLPParams&) = default;
};

// Xavier-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
// dims has one more entry than activations. Pure function of (dims, seed).
MLPParams make_mlp(std::span<const std::size_t> dims, std::span<const Activation> activations,
                   std::uint64_t seed);
MLPParams make_mlp(std::initializer_list<std::size_t> dims,
                   std::initializer_list<Activation> activations, std::uint64_t seed);

struct ForwardCache {
  std::vector<std::vector<double>> inputs;   // input to each layer
  std::vector<std::vector<double>> outputs;  // post-activation output of each layer
};

struct MLPForward {
  std::vector<double> output;
  ForwardCache cache;
};

MLPForward mlp_forward(const MLPParams& params, std::span<const double> input);
std::vector<double> mlp_apply(const MLPParams& params, std::span<const double> input);

struct LayerGradient {
  std::vector<double> weight;
  std::vector<double> bias;
};

// Gradients mirroring an MLPParams layout; `input` holds dL/dx for chaining.
struct GradientBundle {
  std::vector<LayerGradient> layers;
  std::vector<double> input;

  void add_scaled(const GradientBundle& other, double scale);
  bool all_finite() const;
};

GradientBundle zero_gradient(const MLPParams& params);

GradientBundle mlp_backward(const MLPParams& params, const ForwardCache& cache,
                            std::span<const double> output_gradient);

// Parameters (and gradients) flattened layer by layer: weights then biases.
std::vector<double> flatten_parameters(const MLPParams& params);
void assign_parameters(MLPParams& params, std::span<const double> flat);
std::vector<double> flatten_gradient(const GradientBundle& grad);
GradientBundle unflatten_gradient(const MLPParams& like, std::span<const double> flat);

}  // namespace mats
