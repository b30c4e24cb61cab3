#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mats {

// Temperature-scaled softmax, max-subtracted. Throws InvalidArgument on empty
// or non-finite logits and on a non-positive temperature.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0);

// log(sum(exp(x))) evaluated stably.
double log_sum_exp(std::span<const double> x);

}  // namespace mats

namespace mats {

// Log-softmax restricted to entries with mask[i] != 0; masked entries get
// -infinity. An empty mask allows everything. Throws InvalidArgument if the
// mask excludes every entry.
std::vector<double> masked_log_softmax(std::span<const double> logits,
                                       std::span<const std::uint8_t> mask,
                                       double temperature = 1.0);

}  // namespace mats
