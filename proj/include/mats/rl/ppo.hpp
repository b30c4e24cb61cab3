#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mats/numerics/adam.hpp"
#include "mats/numerics/mlp.hpp"
#include "mats/numerics/tensor.hpp"
#include "mats/text_metrics.hpp"

namespace mats {

enum class RewardPreset { text_eq2, image_sqd };
enum class AdvantageEstimator { one_step_td, gae };

std::string_view to_string(RewardPreset preset);
std::string_view to_string(AdvantageEstimator estimator);

struct PPOConfig {
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double learning_rate = 3e-4;
  std::optional<double> gae_lambda = 0.95;  // unset: one-step TD advantages
  std::size_t batch_size = 32;
  std::size_t epochs_per_batch = 10;
  RewardPreset reward_preset = RewardPreset::text_eq2;

  AdvantageEstimator estimator() const {
    return gae_lambda ? AdvantageEstimator::gae : AdvantageEstimator::one_step_td;
  }
  void validate() const;

  static PPOConfig defaults();     // lr 3e-4, batch 32
  static PPOConfig text_preset();  // lr 5e-5, batch 16
  static PPOConfig image_preset(); // lr 5e-5, batch 8, image_sqd reward
  // "default" | "text" | "image"
  static PPOConfig from_preset(std::string_view name);
};

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double old_log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double next_value = 0.0;
  bool terminal = false;
  std::vector<std::uint8_t> mask;  // empty: every action allowed
};

struct Trajectory {
  std::vector<Transition> transitions;
  double episode_return = 0.0;

  // Fills episode_return with the discounted reward sum.
  static Trajectory from(std::vector<Transition> transitions, double gamma);
};

struct AdvantageEstimate {
  std::vector<double> values;
  AdvantageEstimator estimator = AdvantageEstimator::gae;
};

// Reward inputs; a preset reads only the fields it needs. Image components
// are already in [0, 1].
struct RewardSample {
  std::optional<TextMetricReport> text;
  std::optional<double> similarity;
  std::optional<double> quality;
  std::optional<double> diversity;
};

double compute_reward(const RewardSample& sample, RewardPreset preset);

// clamp01((cos + 1) / 2)
double similarity_component(double cosine);
// Mean pairwise mean-absolute pixel distance; 0 for fewer than two images.
double candidate_diversity(std::span<const Tensor> images);

AdvantageEstimate compute_advantage(const Trajectory& trajectory, const PPOConfig& config);

// min(rho A, clip(rho, 1 - eps, 1 + eps) A), rho = exp(new - old).
double clipped_objective(double new_log_prob, double old_log_prob, double advantage,
                         double epsilon);

// Log-probability of each transition's action under `policy` (temperature 1,
// honouring the mask).
std::vector<double> action_log_probs(const MLPParams& policy, std::span<const Transition> batch);

// Mean clipped objective over the batch and its analytic parameter gradient.
double policy_objective(const MLPParams& policy, std::span<const Transition> batch,
                        std::span<const double> advantages, double epsilon);
GradientBundle policy_objective_gradient(const MLPParams& policy,
                                         std::span<const Transition> batch,
                                         std::span<const double> advantages, double epsilon);

// Mean squared one-step TD error (r + gamma V' - V(s))^2, V' held fixed.
double value_loss(const MLPParams& value, std::span<const Transition> batch, double gamma);

struct PolicyValue {
  std::string name;
  MLPParams policy;
  MLPParams value;
  Adam policy_optimizer;
  Adam value_optimizer;
};

// policy: state_dim -> hidden (tanh) -> action_count; value: state_dim ->
// hidden (tanh) -> 1.
PolicyValue make_policy_value(std::string name, std::size_t state_dim, std::size_t action_count,
                              std::uint64_t seed, double learning_rate, std::size_t hidden = 16);
// Wraps an existing policy network with a fresh value net and optimizers.
PolicyValue wrap_policy(std::string name, MLPParams policy, std::uint64_t seed,
                        double learning_rate, std::size_t hidden = 16);

double state_value(const PolicyValue& agent, std::span<const double> state);

struct UpdateStats {
  double objective_before = 0.0;
  double objective_after = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double value_loss_before = 0.0;
  double value_loss_after = 0.0;
};

// epochs_per_batch full-batch Adam steps: ascent on the mean clipped
// objective, descent on the value loss. Parameters are untouched if a
// gradient turns non-finite (NumericError).
UpdateStats ppo_update(PolicyValue& agent, std::span<const Transition> batch,
                       std::span<const double> advantages, const PPOConfig& config);
UpdateStats ppo_update(PolicyValue& agent, std::span<const Trajectory> trajectories,
                       const PPOConfig& config);

}  // namespace mats
