#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mats {

// Adam over a flat parameter vector. `descend` subtracts the adapted step,
// `ascend` adds it.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void descend(std::span<double> params, std::span<const double> grad);
  void ascend(std::span<double> params, std::span<const double> grad);

  double learning_rate() const { return lr_; }
  std::size_t steps() const { return t_; }

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  void step(std::span<double> params, std::span<const double> grad, double sign);

  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace mats
