#include "mats/numerics/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mats/error.hpp"

namespace mats {

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> x,
    double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_difference_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_difference_gradient: non-finite evaluation at coordinate " +
                         std::to_string(i));
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradientBundle finite_difference_gradient(const std::function<double(const MLPParams&)>& f,
                                          const MLPParams& params, double step) {
  MLPParams probe = params;
  const std::vector<double> flat = flatten_parameters(params);
  auto g = finite_difference_gradient(
      [&](std::span<const double> theta) {
        assign_parameters(probe, theta);
        return f(probe);
      },
      flat, step);
  GradientBundle bundle = unflatten_gradient(params, g);
  bundle.input.clear();
  return bundle;
}

double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double absolute_floor) {
  if (a.size() != b.size()) throw InvalidArgument("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), absolute_floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace mats
