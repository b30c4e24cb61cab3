#include "mats/rl/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/numerics/softmax.hpp"

namespace mats {

namespace {

std::vector<double> log_probs_for(const MLPParams& policy, const Transition& t,
                                  std::vector<double>* logits_out = nullptr) {
  auto logits = mlp_apply(policy, t.state);
  if (t.action >= logits.size()) throw InvalidArgument("transition action out of range");
  std::vector<double> logp;
  if (t.mask.empty()) {
    logp = log_softmax(logits);
  } else {
    if (t.mask.size() != logits.size()) throw InvalidArgument("transition mask size mismatch");
    logp = masked_log_softmax(logits, t.mask, 1.0);
  }
  if (logits_out) *logits_out = std::move(logits);
  return logp;
}

double ratio_clip(double rho, double eps) { return std::clamp(rho, 1.0 - eps, 1.0 + eps); }

void check_batch(std::span<const Transition> batch, std::span<const double> advantages) {
  if (batch.empty()) throw InvalidArgument("ppo: empty batch");
  if (advantages.size() != batch.size())
    throw InvalidArgument("ppo: advantages and batch differ in length");
}

}  // namespace

std::string_view to_string(RewardPreset preset) {
  return preset == RewardPreset::text_eq2 ? "text_eq2" : "image_sqd";
}

std::string_view to_string(AdvantageEstimator estimator) {
  return estimator == AdvantageEstimator::gae ? "gae" : "one_step_td";
}

void PPOConfig::validate() const {
  if (!(clip_epsilon > 0.0)) throw ConfigError("ppo: clip epsilon must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("ppo: gamma must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning rate must be positive");
  if (gae_lambda && !(*gae_lambda >= 0.0 && *gae_lambda <= 1.0))
    throw ConfigError("ppo: gae lambda must be in [0, 1]");
  if (batch_size == 0) throw ConfigError("ppo: batch size must be positive");
  if (epochs_per_batch == 0) throw ConfigError("ppo: epochs per batch must be positive");
}

PPOConfig PPOConfig::defaults() { return PPOConfig{}; }

PPOConfig PPOConfig::text_preset() {
  PPOConfig c;
  c.learning_rate = 5e-5;
  c.batch_size = 16;
  return c;
}

PPOConfig PPOConfig::image_preset() {
  PPOConfig c;
  c.learning_rate = 5e-5;
  c.batch_size = 8;
  c.reward_preset = RewardPreset::image_sqd;
  return c;
}

PPOConfig PPOConfig::from_preset(std::string_view name) {
  if (name == "default") return defaults();
  if (name == "text") return text_preset();
  if (name == "image") return image_preset();
  throw ConfigError("unknown ppo preset '" + std::string(name) + "'");
}

Trajectory Trajectory::from(std::vector<Transition> transitions, double gamma) {
  Trajectory t;
  double g = 0.0;
  for (auto it = transitions.rbegin(); it != transitions.rend(); ++it) g = it->reward + gamma * g;
  t.transitions = std::move(transitions);
  t.episode_return = g;
  return t;
}

double compute_reward(const RewardSample& s, RewardPreset preset) {
  if (preset == RewardPreset::text_eq2) {
    if (!s.text) throw InvalidArgument("compute_reward: text_eq2 needs text metrics");
    return text_reward(*s.text, RewardWeights::text_preset());
  }
  if (!s.similarity || !s.quality || !s.diversity)
    throw InvalidArgument("compute_reward: image_sqd needs similarity, quality and diversity");
  const auto w = RewardWeights::image_preset();
  return w.at("similarity") * *s.similarity + w.at("quality") * *s.quality +
         w.at("diversity") * *s.diversity;
}

double similarity_component(double cosine) { return std::clamp((cosine + 1.0) / 2.0, 0.0, 1.0); }

double candidate_diversity(std::span<const Tensor> images) {
  if (images.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      if (images[i].shape() != images[j].shape())
        throw InvalidArgument("candidate_diversity: shape mismatch");
      const auto a = images[i].data();
      const auto b = images[j].data();
      double d = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
      total += d / static_cast<double>(a.size());
      ++pairs;
    }
  return std::clamp(total / static_cast<double>(pairs), 0.0, 1.0);
}

AdvantageEstimate compute_advantage(const Trajectory& trajectory, const PPOConfig& config) {
  const auto& ts = trajectory.transitions;
  if (ts.empty()) throw InvalidArgument("compute_advantage: empty trajectory");
  AdvantageEstimate est;
  est.estimator = config.estimator();
  est.values.resize(ts.size());
  std::vector<double> delta(ts.size());
  for (std::size_t t = 0; t < ts.size(); ++t)
    delta[t] = ts[t].reward + config.gamma * (ts[t].terminal ? 0.0 : ts[t].next_value) - ts[t].value;
  if (!config.gae_lambda) {
    est.values = delta;
  } else {
    const double decay = config.gamma * *config.gae_lambda;
    double running = 0.0;
    for (std::size_t k = ts.size(); k-- > 0;) {
      if (ts[k].terminal) running = 0.0;
      running = delta[k] + decay * running;
      est.values[k] = running;
    }
  }
  for (double a : est.values)
    if (!std::isfinite(a)) throw NumericError("compute_advantage: non-finite advantage");
  return est;
}

double clipped_objective(double new_log_prob, double old_log_prob, double advantage,
                         double epsilon) {
  const double rho = std::exp(new_log_prob - old_log_prob);
  return std::min(rho * advantage, ratio_clip(rho, epsilon) * advantage);
}

std::vector<double> action_log_probs(const MLPParams& policy, std::span<const Transition> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back(log_probs_for(policy, t)[t.action]);
  return out;
}

double policy_objective(const MLPParams& policy, std::span<const Transition> batch,
                        std::span<const double> advantages, double epsilon) {
  check_batch(batch, advantages);
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double lp = log_probs_for(policy, batch[i])[batch[i].action];
    sum += clipped_objective(lp, batch[i].old_log_prob, advantages[i], epsilon);
  }
  return sum / static_cast<double>(batch.size());
}

GradientBundle policy_objective_gradient(const MLPParams& policy,
                                         std::span<const Transition> batch,
                                         std::span<const double> advantages, double epsilon) {
  check_batch(batch, advantages);
  GradientBundle total = zero_gradient(policy);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    const auto fwd = mlp_forward(policy, t.state);
    const auto logp = t.mask.empty() ? log_softmax(fwd.output)
                                     : masked_log_softmax(fwd.output, t.mask, 1.0);
    const double rho = std::exp(logp[t.action] - t.old_log_prob);
    const double a = advantages[i];
    // Only the unclipped branch depends on the parameters.
    if (!(rho * a <= ratio_clip(rho, epsilon) * a) || a == 0.0) continue;
    const double d_logp = rho * a * inv_n;
    std::vector<double> d_logits(logp.size());
    for (std::size_t j = 0; j < logp.size(); ++j)
      d_logits[j] = ((j == t.action) ? 1.0 : 0.0) - std::exp(logp[j]);
    for (double& g : d_logits) g *= d_logp;
    total.add_scaled(mlp_backward(policy, fwd.cache, d_logits), 1.0);
  }
  total.input.clear();
  return total;
}

double value_loss(const MLPParams& value, std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw InvalidArgument("value_loss: empty batch");
  double sum = 0.0;
  for (const auto& t : batch) {
    const double target = t.reward + gamma * (t.terminal ? 0.0 : t.next_value);
    const double e = target - mlp_apply(value, t.state)[0];
    sum += e * e;
  }
  return sum / static_cast<double>(batch.size());
}

namespace {

GradientBundle value_loss_gradient(const MLPParams& value, std::span<const Transition> batch,
                                   double gamma) {
  GradientBundle total = zero_gradient(value);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& t : batch) {
    const double target = t.reward + gamma * (t.terminal ? 0.0 : t.next_value);
    const auto fwd = mlp_forward(value, t.state);
    const double g = -2.0 * (target - fwd.output[0]) * inv_n;
    total.add_scaled(mlp_backward(value, fwd.cache, std::span<const double>(&g, 1)), 1.0);
  }
  total.input.clear();
  return total;
}

}  // namespace

PolicyValue make_policy_value(std::string name, std::size_t state_dim, std::size_t action_count,
                              std::uint64_t seed, double learning_rate, std::size_t hidden) {
  auto policy = make_mlp({state_dim, hidden, action_count},
                         {Activation::tanh, Activation::identity}, derive_seed(seed, {1}));
  return wrap_policy(std::move(name), std::move(policy), seed, learning_rate, hidden);
}

PolicyValue wrap_policy(std::string name, MLPParams policy, std::uint64_t seed,
                        double learning_rate, std::size_t hidden) {
  PolicyValue pv;
  pv.name = std::move(name);
  pv.value = make_mlp({policy.in_dim(), hidden, 1}, {Activation::tanh, Activation::identity},
                      derive_seed(seed, {2}));
  pv.policy = std::move(policy);
  pv.policy_optimizer = Adam(pv.policy.parameter_count(), learning_rate);
  pv.value_optimizer = Adam(pv.value.parameter_count(), learning_rate);
  return pv;
}

double state_value(const PolicyValue& agent, std::span<const double> state) {
  return mlp_apply(agent.value, state)[0];
}

UpdateStats ppo_update(PolicyValue& agent, std::span<const Transition> batch,
                       std::span<const double> advantages, const PPOConfig& config) {
  config.validate();
  check_batch(batch, advantages);
  for (double a : advantages)
    if (!std::isfinite(a)) throw NumericError("ppo_update: non-finite advantage");

  MLPParams policy = agent.policy;
  MLPParams value = agent.value;
  Adam popt = agent.policy_optimizer;
  Adam vopt = agent.value_optimizer;

  UpdateStats stats;
  stats.objective_before = policy_objective(policy, batch, advantages, config.clip_epsilon);
  stats.value_loss_before = value_loss(value, batch, config.gamma);

  auto pflat = flatten_parameters(policy);
  auto vflat = flatten_parameters(value);
  for (std::size_t epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
    const auto pg = policy_objective_gradient(policy, batch, advantages, config.clip_epsilon);
    const auto vg = value_loss_gradient(value, batch, config.gamma);
    if (!pg.all_finite() || !vg.all_finite())
      throw NumericError("ppo_update: non-finite gradient in epoch " + std::to_string(epoch) +
                         " of agent '" + agent.name + "'");
    popt.ascend(pflat, flatten_gradient(pg));
    vopt.descend(vflat, flatten_gradient(vg));
    assign_parameters(policy, pflat);
    assign_parameters(value, vflat);
  }

  stats.objective_after = policy_objective(policy, batch, advantages, config.clip_epsilon);
  stats.value_loss_after = value_loss(value, batch, config.gamma);
  const auto lp = action_log_probs(policy, batch);
  double ratio_sum = 0.0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double rho = std::exp(lp[i] - batch[i].old_log_prob);
    ratio_sum += rho;
    clipped += std::abs(rho - 1.0) > config.clip_epsilon ? 1 : 0;
  }
  stats.mean_ratio = ratio_sum / static_cast<double>(batch.size());
  stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(batch.size());
  if (!std::isfinite(stats.objective_after) || !std::isfinite(stats.value_loss_after))
    throw NumericError("ppo_update: non-finite statistics for agent '" + agent.name + "'");

  agent.policy = std::move(policy);
  agent.value = std::move(value);
  agent.policy_optimizer = std::move(popt);
  agent.value_optimizer = std::move(vopt);
  return stats;
}

UpdateStats ppo_update(PolicyValue& agent, std::span<const Trajectory> trajectories,
                       const PPOConfig& config) {
  std::vector<Transition> batch;
  std::vector<double> adv;
  for (const auto& tr : trajectories) {
    const auto est = compute_advantage(tr, config);
    batch.insert(batch.end(), tr.transitions.begin(), tr.transitions.end());
    adv.insert(adv.end(), est.values.begin(), est.values.end());
  }
  return ppo_update(agent, batch, adv, config);
}

}  // namespace mats
