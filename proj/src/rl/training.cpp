#include "mats/rl/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "json.hpp"
#include "mats/error.hpp"
#include "mats/fusion.hpp"
#include "mats/numerics/softmax.hpp"
#include "mats/text_metrics.hpp"

namespace mats {

namespace {

std::size_t greedy_action(const MLPParams& policy, std::span<const double> state,
                          std::span<const std::uint8_t> mask) {
  const auto logits = mlp_apply(policy, state);
  std::size_t best = logits.size();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if ((mask.empty() || mask[i]) && (best == logits.size() || logits[i] > logits[best])) best = i;
  if (best == logits.size()) throw InvalidArgument("greedy_action: every action masked");
  return best;
}

// Turns a sequence of (state, mask, action, log_prob) steps with a terminal
// reward into value-annotated transitions.
Trajectory finish_episode(const PolicyValue& agent, const std::vector<EnhanceStep>& steps,
                          double terminal_reward, double gamma) {
  std::vector<Transition> ts;
  ts.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Transition t;
    t.state = steps[i].state;
    t.mask = steps[i].mask;
    t.action = steps[i].action;
    t.old_log_prob = steps[i].log_prob;
    t.value = state_value(agent, t.state);
    t.terminal = i + 1 == steps.size();
    t.reward = t.terminal ? terminal_reward : 0.0;
    t.next_value = t.terminal ? 0.0 : state_value(agent, steps[i + 1].state);
    ts.push_back(std::move(t));
  }
  return Trajectory::from(std::move(ts), gamma);
}

}  // namespace

SampledAction sample_action(const MLPParams& policy, std::span<const double> state,
                            std::span<const std::uint8_t> mask, SplitMix64& rng) {
  const auto logits = mlp_apply(policy, state);
  const auto logp = mask.empty() ? log_softmax(logits) : masked_log_softmax(logits, mask, 1.0);
  const double u = rng.uniform();
  double acc = 0.0;
  SampledAction out{logp.size(), 0.0};
  for (std::size_t i = 0; i < logp.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    out.action = i;
    acc += std::exp(logp[i]);
    if (u < acc) break;
  }
  out.log_prob = logp[out.action];
  return out;
}

std::vector<double> action_probabilities(const MLPParams& policy, std::span<const double> state) {
  return softmax(mlp_apply(policy, state));
}

// ------------------------------------------------------------------- bandit

BanditEnvironment::BanditEnvironment(std::vector<double> arm_rewards, std::size_t agents,
                                     double coupling)
    : arm_rewards_(std::move(arm_rewards)), agents_(agents), coupling_(coupling) {
  if (arm_rewards_.size() < 2) throw InvalidArgument("bandit: need at least two arms");
  if (agents_ == 0) throw InvalidArgument("bandit: need at least one agent");
}

std::size_t BanditEnvironment::best_arm() const {
  return static_cast<std::size_t>(
      std::max_element(arm_rewards_.begin(), arm_rewards_.end()) - arm_rewards_.begin());
}

std::vector<PolicyValue> BanditEnvironment::make_agents(std::uint64_t seed,
                                                        double learning_rate) const {
  std::vector<PolicyValue> out;
  for (std::size_t k = 0; k < agents_; ++k)
    out.push_back(make_policy_value("bandit:" + std::to_string(k), 1, arm_rewards_.size(),
                                    derive_seed(seed, {k}), learning_rate));
  return out;
}

std::vector<Trajectory> BanditEnvironment::rollout(std::size_t agent,
                                                   std::span<const PolicyValue> snapshot,
                                                   std::uint64_t seed, std::size_t episodes,
                                                   double gamma) const {
  if (snapshot.size() != agents_ || agent >= agents_)
    throw InvalidArgument("bandit: snapshot does not match agent count");
  const auto s = state();
  std::vector<double> crowd(arm_rewards_.size(), 0.0);
  if (agents_ > 1) {
    for (std::size_t k = 0; k < agents_; ++k)
      if (k != agent) crowd[greedy_action(snapshot[k].policy, s, {})] += 1.0;
    for (double& c : crowd) c /= static_cast<double>(agents_ - 1);
  }
  const PolicyValue& me = snapshot[agent];
  const double v = state_value(me, s);
  std::vector<Trajectory> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    SplitMix64 rng(derive_seed(seed, {e}));
    const auto a = sample_action(me.policy, s, {}, rng);
    Transition t;
    t.state = s;
    t.action = a.action;
    t.old_log_prob = a.log_prob;
    t.reward = arm_rewards_[a.action] - coupling_ * crowd[a.action];
    t.value = v;
    t.terminal = true;
    out.push_back(Trajectory::from({std::move(t)}, gamma));
  }
  return out;
}

// --------------------------------------------------------------------- text

TextEnhancementEnvironment::TextEnhancementEnvironment(TextAgentTeam team, DomainRouting routing,
                                                       std::vector<TextEpisode> episodes,
                                                       std::size_t max_steps)
    : team_(std::move(team)),
      routing_(std::move(routing)),
      episodes_(std::move(episodes)),
      max_steps_(max_steps) {
  if (episodes_.empty()) throw InvalidArgument("text environment: no episodes");
}

std::vector<PolicyValue> TextEnhancementEnvironment::make_agents(std::uint64_t seed,
                                                                 double learning_rate) const {
  std::vector<PolicyValue> out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto role = static_cast<TextRole>(k);
    out.push_back(wrap_policy("text:" + std::string(to_string(role)), team_.for_role(role).policy,
                              derive_seed(seed, {k}), learning_rate));
  }
  return out;
}

TextAgentTeam TextEnhancementEnvironment::team_with(std::span<const PolicyValue> snapshot) const {
  if (snapshot.size() != 4) throw InvalidArgument("text environment: expected four agents");
  TextAgentTeam team = team_;
  for (std::size_t k = 0; k < 4; ++k) team.for_role(static_cast<TextRole>(k)).policy = snapshot[k].policy;
  return team;
}

std::vector<Trajectory> TextEnhancementEnvironment::rollout(std::size_t agent,
                                                            std::span<const PolicyValue> snapshot,
                                                            std::uint64_t seed,
                                                            std::size_t episodes,
                                                            double gamma) const {
  if (agent >= 4) throw InvalidArgument("text environment: agent index out of range");
  const auto team = team_with(snapshot);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const auto routed = routing_.route(tokenize(episodes_[i].prompt));
    if (agent == 0 || (routed && static_cast<std::size_t>(*routed) + 1 == agent))
      eligible.push_back(i);
  }
  if (eligible.empty())
    throw InvalidArgument("text environment: no episode routes to agent " + snapshot[agent].name);

  std::vector<Trajectory> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    SplitMix64 rng(derive_seed(seed, {e}));
    const auto& ep = episodes_[eligible[rng.below(eligible.size())]];
    Sampling acting{1.0, rng.next_u64()};
    const auto result = multi_agent_enhance(tokenize(ep.prompt), team, routing_, max_steps_,
                                            agent == 0 ? acting : Sampling{},
                                            agent == 0 ? Sampling{} : acting);
    const auto& trace = agent == 0 ? result.expander_trace : *result.domain_trace;
    const double reward =
        text_reward(evaluate_text(join(result.tokens), ep.reference), RewardWeights::text_preset());
    out.push_back(finish_episode(snapshot[agent], trace.steps, reward, gamma));
  }
  return out;
}

// -------------------------------------------------------------------- image

ImageLatentEnvironment::ImageLatentEnvironment(std::vector<ImageAgentSpec> agents,
                                               std::vector<ImageEpisode> episodes,
                                               std::shared_ptr<const ProjectionParams> projection,
                                               std::size_t steps)
    : agents_(std::move(agents)),
      episodes_(std::move(episodes)),
      projection_(std::move(projection)),
      steps_(steps) {
  if (agents_.empty()) throw InvalidArgument("image environment: no agents");
  if (episodes_.empty()) throw InvalidArgument("image environment: no episodes");
  if (!projection_) throw InvalidArgument("image environment: missing projection");
  if (steps_ == 0) throw InvalidArgument("image environment: steps must be positive");
}

std::vector<PolicyValue> ImageLatentEnvironment::make_agents(std::uint64_t seed,
                                                             double learning_rate) const {
  std::vector<PolicyValue> out;
  for (std::size_t k = 0; k < agents_.size(); ++k)
    out.push_back(make_policy_value(agents_[k].id(), kLatentDim + 1, kLatentActions,
                                    derive_seed(seed, {k}), learning_rate));
  return out;
}

std::vector<double> ImageLatentEnvironment::apply_action(std::vector<double> latent,
                                                         std::size_t action) {
  if (action >= kLatentActions) throw InvalidArgument("image action out of range");
  if (action + 1 == kLatentActions) return latent;
  const std::size_t dim = action / 2;
  latent.at(dim) += (action % 2 == 0) ? kLatentDelta : -kLatentDelta;
  return latent;
}

std::vector<double> ImageLatentEnvironment::start_latent(std::size_t agent,
                                                         std::size_t episode) const {
  const auto features = embed_text(episodes_.at(episode).prompt);
  return route_features(agents_.at(agent), features.values).values;
}

namespace {

std::vector<double> latent_state(const std::vector<double>& z, std::size_t step, std::size_t n) {
  std::vector<double> s = z;
  s.push_back(static_cast<double>(step) / static_cast<double>(n));
  return s;
}

}  // namespace

GeneratedImage ImageLatentEnvironment::greedy_image(std::size_t agent, const PolicyValue& policy,
                                                    std::size_t episode) const {
  auto z = start_latent(agent, episode);
  for (std::size_t step = 0; step < steps_; ++step)
    z = apply_action(std::move(z), greedy_action(policy.policy, latent_state(z, step, steps_), {}));
  return generate_image(agents_[agent], AgentLatent{z, agents_[agent].id()},
                        episodes_[episode].tags);
}

double ImageLatentEnvironment::similarity(const GeneratedImage& image, std::size_t episode) const {
  const auto t = project_to_shared(embed_text(episodes_.at(episode).prompt).values, Modality::text,
                                   *projection_);
  const auto v = project_to_shared(extract_image_features(image.pixels).values, Modality::image,
                                   *projection_);
  return similarity_component(cosine_similarity(t.values, v.values));
}

std::vector<Trajectory> ImageLatentEnvironment::rollout(std::size_t agent,
                                                        std::span<const PolicyValue> snapshot,
                                                        std::uint64_t seed, std::size_t episodes,
                                                        double gamma) const {
  if (snapshot.size() != agents_.size() || agent >= agents_.size())
    throw InvalidArgument("image environment: snapshot does not match agent count");
  std::map<std::size_t, std::vector<Tensor>> others;
  std::vector<Trajectory> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    SplitMix64 rng(derive_seed(seed, {e}));
    const std::size_t ep = rng.below(episodes_.size());
    if (!others.contains(ep)) {
      auto& imgs = others[ep];
      for (std::size_t k = 0; k < agents_.size(); ++k)
        if (k != agent) imgs.push_back(greedy_image(k, snapshot[k], ep).pixels);
    }
    auto z = start_latent(agent, ep);
    std::vector<EnhanceStep> steps;
    for (std::size_t step = 0; step < steps_; ++step) {
      EnhanceStep st;
      st.state = latent_state(z, step, steps_);
      const auto a = sample_action(snapshot[agent].policy, st.state, {}, rng);
      st.action = a.action;
      st.log_prob = a.log_prob;
      z = apply_action(std::move(z), a.action);
      steps.push_back(std::move(st));
    }
    const auto image =
        generate_image(agents_[agent], AgentLatent{z, agents_[agent].id()}, episodes_[ep].tags);
    std::vector<Tensor> pool = others[ep];
    pool.push_back(image.pixels);
    RewardSample sample;
    sample.similarity = similarity(image, ep);
    sample.quality = image_quality_score(image);
    sample.diversity = candidate_diversity(pool);
    out.push_back(finish_episode(snapshot[agent], steps,
                                 compute_reward(sample, RewardPreset::image_sqd), gamma));
  }
  return out;
}

// ----------------------------------------------------------------- training

std::string_view to_string(TrainingMode mode) {
  return mode == TrainingMode::sequential ? "sequential" : "simultaneous";
}

TrainingMode parse_training_mode(std::string_view name) {
  if (name == "sequential") return TrainingMode::sequential;
  if (name == "simultaneous") return TrainingMode::simultaneous;
  throw ConfigError("unknown training mode '" + std::string(name) + "'");
}

std::string TrainingLog::to_json_lines() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j = {{"iteration", r.iteration},
                                {"agent", r.agent_name},
                                {"mean_reward", r.mean_reward},
                                {"mean_objective", r.mean_objective},
                                {"clip_fraction", r.clip_fraction},
                                {"value_loss", r.value_loss}};
    if (r.error) j["error"] = *r.error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace {

struct RolloutOutcome {
  std::vector<Trajectory> trajectories;
  std::optional<std::string> error;
};

RolloutOutcome safe_rollout(const Environment& env, std::size_t agent,
                            std::span<const PolicyValue> snapshot, std::uint64_t seed,
                            const PPOConfig& config) {
  try {
    return {env.rollout(agent, snapshot, seed, config.batch_size, config.gamma), std::nullopt};
  } catch (const std::exception& e) {
    return {{}, std::string("rollout failed: ") + e.what()};
  }
}

TrainingRecord update_agent(PolicyValue& agent, std::size_t index, std::size_t iteration,
                            RolloutOutcome outcome, const PPOConfig& config) {
  TrainingRecord rec;
  rec.iteration = iteration;
  rec.agent = index;
  rec.agent_name = agent.name;
  if (outcome.error) {
    rec.error = outcome.error;
    return rec;
  }
  double reward = 0.0;
  for (const auto& t : outcome.trajectories)
    for (const auto& tr : t.transitions) reward += tr.reward;
  rec.mean_reward = reward / static_cast<double>(std::max<std::size_t>(1, outcome.trajectories.size()));
  try {
    const auto stats = ppo_update(agent, outcome.trajectories, config);
    rec.mean_objective = stats.objective_after;
    rec.clip_fraction = stats.clip_fraction;
    rec.value_loss = stats.value_loss_after;
  } catch (const std::exception& e) {
    rec.error = std::string("update failed: ") + e.what();
  }
  return rec;
}

}  // namespace

TrainingLog train_agents(std::vector<PolicyValue>& agents, const Environment& environment,
                         const PPOConfig& config, TrainingMode mode, std::size_t iterations,
                         std::uint64_t seed) {
  config.validate();
  if (agents.empty()) throw InvalidArgument("train_agents: no agents");
  if (agents.size() != environment.agent_count())
    throw InvalidArgument("train_agents: agent count does not match environment");
  TrainingLog log;
  for (std::size_t it = 0; it < iterations; ++it) {
    if (mode == TrainingMode::sequential) {
      for (std::size_t k = 0; k < agents.size(); ++k) {
        auto outcome = safe_rollout(environment, k, agents, derive_seed(seed, {k, it}), config);
        log.records.push_back(update_agent(agents[k], k, it, std::move(outcome), config));
      }
    } else {
      const std::vector<PolicyValue> snapshot = agents;
      std::vector<RolloutOutcome> outcomes;
      for (std::size_t k = 0; k < agents.size(); ++k)
        outcomes.push_back(safe_rollout(environment, k, snapshot, derive_seed(seed, {k, it}), config));
      for (std::size_t k = 0; k < agents.size(); ++k)
        log.records.push_back(update_agent(agents[k], k, it, std::move(outcomes[k]), config));
    }
  }
  return log;
}

}  // namespace mats
