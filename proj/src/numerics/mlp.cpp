#include "mats/numerics/mlp.hpp"

#include <cmath>
#include <string>

#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"

namespace mats {

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: break;
  }
  return x;
}

// Derivative expressed through the activation output y.
double activate_grad(Activation a, double pre, double y) {
  switch (a) {
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::identity: break;
  }
  return 1.0;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::size_t MLPParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MLPParams::validate() const {
  if (layers.empty()) throw InvalidArgument("mlp: no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.in_dim == 0 || l.out_dim == 0) throw InvalidArgument("mlp: zero layer dimension");
    if (l.weight.size() != l.in_dim * l.out_dim || l.bias.size() != l.out_dim)
      throw InvalidArgument("mlp: layer " + std::to_string(k) + " buffer size mismatch");
    if (k + 1 < layers.size() && l.out_dim != layers[k + 1].in_dim)
      throw InvalidArgument("mlp: layer " + std::to_string(k) + " does not chain");
  }
}

MLPParams make_mlp(std::span<const std::size_t> dims, std::span<const Activation> activations,
                   std::uint64_t seed) {
  if (dims.size() < 2 || activations.size() + 1 != dims.size())
    throw InvalidArgument("make_mlp: need dims.size() == activations.size() + 1 >= 2");
  MLPParams p;
  p.seed = seed;
  SplitMix64 rng(seed);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    DenseLayer l;
    l.in_dim = dims[k];
    l.out_dim = dims[k + 1];
    l.activation = activations[k];
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    l.weight.resize(l.in_dim * l.out_dim);
    for (double& w : l.weight) w = rng.uniform(-limit, limit);
    l.bias.assign(l.out_dim, 0.0);
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

MLPParams make_mlp(std::initializer_list<std::size_t> dims,
                   std::initializer_list<Activation> activations, std::uint64_t seed) {
  return make_mlp(std::span<const std::size_t>(dims.begin(), dims.size()),
                  std::span<const Activation>(activations.begin(), activations.size()), seed);
}

MLPForward mlp_forward(const MLPParams& params, std::span<const double> input) {
  params.validate();
  if (input.size() != params.in_dim())
    throw InvalidArgument("mlp_forward: input length " + std::to_string(input.size()) +
                          " != in_dim " + std::to_string(params.in_dim()));
  MLPForward fwd;
  std::vector<double> x(input.begin(), input.end());
  for (const auto& l : params.layers) {
    std::vector<double> y(l.out_dim);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double* row = &l.weight[o * l.in_dim];
      double s = l.bias[o];
      for (std::size_t i = 0; i < l.in_dim; ++i) s += row[i] * x[i];
      y[o] = activate(l.activation, s);
    }
    fwd.cache.inputs.push_back(std::move(x));
    fwd.cache.outputs.push_back(y);
    x = std::move(y);
  }
  fwd.output = std::move(x);
  return fwd;
}

std::vector<double> mlp_apply(const MLPParams& params, std::span<const double> input) {
  return mlp_forward(params, input).output;
}

GradientBundle zero_gradient(const MLPParams& params) {
  GradientBundle g;
  for (const auto& l : params.layers)
    g.layers.push_back({std::vector<double>(l.weight.size(), 0.0),
                        std::vector<double>(l.bias.size(), 0.0)});
  g.input.assign(params.layers.empty() ? 0 : params.in_dim(), 0.0);
  return g;
}

void GradientBundle::add_scaled(const GradientBundle& other, double scale) {
  if (other.layers.size() != layers.size()) throw InvalidArgument("gradient layout mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& dst = layers[k];
    const auto& src = other.layers[k];
    if (dst.weight.size() != src.weight.size() || dst.bias.size() != src.bias.size())
      throw InvalidArgument("gradient layout mismatch");
    for (std::size_t i = 0; i < dst.weight.size(); ++i) dst.weight[i] += scale * src.weight[i];
    for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += scale * src.bias[i];
  }
  if (input.size() == other.input.size())
    for (std::size_t i = 0; i < input.size(); ++i) input[i] += scale * other.input[i];
}

bool GradientBundle::all_finite() const {
  for (const auto& l : layers) {
    for (double v : l.weight)
      if (!std::isfinite(v)) return false;
    for (double v : l.bias)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

GradientBundle mlp_backward(const MLPParams& params, const ForwardCache& cache,
                            std::span<const double> output_gradient) {
  params.validate();
  const std::size_t n = params.layers.size();
  if (cache.inputs.size() != n || cache.outputs.size() != n)
    throw InvalidArgument("mlp_backward: cache does not match network depth");
  if (output_gradient.size() != params.out_dim())
    throw InvalidArgument("mlp_backward: output gradient length mismatch");

  GradientBundle g = zero_gradient(params);
  std::vector<double> upstream(output_gradient.begin(), output_gradient.end());
  for (std::size_t k = n; k-- > 0;) {
    const auto& l = params.layers[k];
    const auto& x = cache.inputs[k];
    const auto& y = cache.outputs[k];
    if (x.size() != l.in_dim || y.size() != l.out_dim)
      throw InvalidArgument("mlp_backward: cache shape mismatch at layer " + std::to_string(k));
    std::vector<double> delta(l.out_dim);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      // Pre-activation is only needed for relu; recover its sign from y.
      const double pre = l.activation == Activation::relu ? y[o] : 0.0;
      delta[o] = upstream[o] * activate_grad(l.activation, pre, y[o]);
    }
    auto& lg = g.layers[k];
    std::vector<double> down(l.in_dim, 0.0);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double d = delta[o];
      lg.bias[o] = d;
      if (d == 0.0) continue;
      const double* row = &l.weight[o * l.in_dim];
      double* grow = &lg.weight[o * l.in_dim];
      for (std::size_t i = 0; i < l.in_dim; ++i) {
        grow[i] = d * x[i];
        down[i] += d * row[i];
      }
    }
    upstream = std::move(down);
  }
  g.input = std::move(upstream);
  return g;
}

std::vector<double> flatten_parameters(const MLPParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for (const auto& l : params.layers) {
    flat.insert(flat.end(), l.weight.begin(), l.weight.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void assign_parameters(MLPParams& params, std::span<const double> flat) {
  if (flat.size() != params.parameter_count())
    throw InvalidArgument("assign_parameters: length mismatch");
  std::size_t at = 0;
  for (auto& l : params.layers) {
    for (double& w : l.weight) w = flat[at++];
    for (double& b : l.bias) b = flat[at++];
  }
}

std::vector<double> flatten_gradient(const GradientBundle& grad) {
  std::vector<double> flat;
  for (const auto& l : grad.layers) {
    flat.insert(flat.end(), l.weight.begin(), l.weight.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

GradientBundle unflatten_gradient(const MLPParams& like, std::span<const double> flat) {
  GradientBundle g = zero_gradient(like);
  if (flat.size() != like.parameter_count())
    throw InvalidArgument("unflatten_gradient: length mismatch");
  std::size_t at = 0;
  for (auto& l : g.layers) {
    for (double& w : l.weight) w = flat[at++];
    for (double& b : l.bias) b = flat[at++];
  }
  return g;
}

}  // namespace mats
