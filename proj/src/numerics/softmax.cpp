#include "mats/numerics/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mats/error.hpp"

namespace mats {

namespace {

void check_logits(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw InvalidArgument("softmax: empty logits");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidArgument("softmax: temperature must be positive");
  for (double v : logits)
    if (!std::isfinite(v)) throw InvalidArgument("softmax: non-finite logit");
}

}  // namespace

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("log_sum_exp: empty input");
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  check_logits(logits, temperature);
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - m) / temperature);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  check_logits(logits, temperature);
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  const double lse = log_sum_exp(scaled);
  for (double& v : scaled) v -= lse;
  return scaled;
}

}  // namespace mats

namespace mats {

std::vector<double> masked_log_softmax(std::span<const double> logits,
                                       std::span<const std::uint8_t> mask, double temperature) {
  if (mask.empty()) return log_softmax(logits, temperature);
  if (mask.size() != logits.size()) throw InvalidArgument("masked_log_softmax: mask length");
  std::vector<double> allowed;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) allowed.push_back(logits[i]);
  if (allowed.empty()) throw InvalidArgument("masked_log_softmax: every action masked");
  const auto lp = log_softmax(allowed, temperature);
  std::vector<double> out(logits.size(), -std::numeric_limits<double>::infinity());
  std::size_t k = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) out[i] = lp[k++];
  return out;
}

}  // namespace mats
