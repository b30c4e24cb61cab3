#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mats/numerics/mlp.hpp"

namespace mats {

// Central differences (f(x+h) - f(x-h)) / 2h for every coordinate of x.
// Throws NumericError if any evaluation of f is non-finite.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> x,
    double step = 1e-5);

// Same, over every parameter of an MLP. The returned bundle's `input` is empty.
GradientBundle finite_difference_gradient(const std::function<double(const MLPParams&)>& f,
                                          const MLPParams& params, double step = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor); the floor keeps near-zero
// gradients from dominating.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double absolute_floor = 1e-7);

}  // namespace mats
