#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mats/agents/agents.hpp"
#include "mats/embeddings/embeddings.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/rl/ppo.hpp"

namespace mats {

struct SampledAction {
  std::size_t action = 0;
  double log_prob = 0.0;
};

// Categorical draw at temperature 1 over the unmasked actions.
SampledAction sample_action(const MLPParams& policy, std::span<const double> state,
                            std::span<const std::uint8_t> mask, SplitMix64& rng);
std::vector<double> action_probabilities(const MLPParams& policy, std::span<const double> state);

// Rollout generator. `snapshot` holds every agent's current parameters; an
// implementation must read other agents only through it.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t agent_count() const = 0;
  virtual std::vector<Trajectory> rollout(std::size_t agent, std::span<const PolicyValue> snapshot,
                                          std::uint64_t seed, std::size_t episodes,
                                          double gamma) const = 0;
};

// One-step episodes with a constant state {1}. Agent reward is
// arm_rewards[a] - coupling * (share of other agents whose greedy arm is a).
class BanditEnvironment final : public Environment {
 public:
  explicit BanditEnvironment(std::vector<double> arm_rewards, std::size_t agents = 1,
                             double coupling = 0.0);

  std::size_t agent_count() const override { return agents_; }
  std::size_t arm_count() const { return arm_rewards_.size(); }
  std::size_t best_arm() const;
  std::vector<PolicyValue> make_agents(std::uint64_t seed, double learning_rate) const;
  std::vector<Trajectory> rollout(std::size_t agent, std::span<const PolicyValue> snapshot,
                                  std::uint64_t seed, std::size_t episodes,
                                  double gamma) const override;

  static std::vector<double> state() { return {1.0}; }

 private:
  std::vector<double> arm_rewards_;
  std::size_t agents_;
  double coupling_;
};

struct TextEpisode {
  std::string prompt;
  std::string reference;
};

// Agents, in order: expander, architecture, portrait, landscape. An episode
// runs the full expander -> routed domain agent pipeline; the acting agent
// samples, the rest act greedily from the snapshot. The only reward is
// terminal: text_reward (text_eq2 weights) of the output against the
// reference.
class TextEnhancementEnvironment final : public Environment {
 public:
  TextEnhancementEnvironment(TextAgentTeam team, DomainRouting routing,
                             std::vector<TextEpisode> episodes,
                             std::size_t max_steps = kDefaultEnhanceSteps);

  std::size_t agent_count() const override { return 4; }
  std::vector<PolicyValue> make_agents(std::uint64_t seed, double learning_rate) const;
  TextAgentTeam team_with(std::span<const PolicyValue> snapshot) const;
  std::vector<Trajectory> rollout(std::size_t agent, std::span<const PolicyValue> snapshot,
                                  std::uint64_t seed, std::size_t episodes,
                                  double gamma) const override;

 private:
  TextAgentTeam team_;
  DomainRouting routing_;
  std::vector<TextEpisode> episodes_;
  std::size_t max_steps_;
};

inline constexpr std::size_t kPerturbedLatentDims = 8;
inline constexpr double kLatentDelta = 0.1;
inline constexpr std::size_t kLatentActions = 2 * kPerturbedLatentDims + 1;  // last: no-op

struct ImageEpisode {
  std::string prompt;
  TagSet tags;
};

// One agent per image agent. State = latent followed by step fraction;
// actions nudge one of the first 8 latent dims by +-0.1 or do nothing.
// Terminal reward uses image_sqd: shared-space similarity to the prompt,
// image quality, and diversity against the other agents' greedy images.
class ImageLatentEnvironment final : public Environment {
 public:
  ImageLatentEnvironment(std::vector<ImageAgentSpec> agents, std::vector<ImageEpisode> episodes,
                         std::shared_ptr<const ProjectionParams> projection,
                         std::size_t steps = 4);

  std::size_t agent_count() const override { return agents_.size(); }
  std::vector<PolicyValue> make_agents(std::uint64_t seed, double learning_rate) const;
  // Deterministic image for `episode` with greedy actions.
  GeneratedImage greedy_image(std::size_t agent, const PolicyValue& policy,
                              std::size_t episode) const;
  double similarity(const GeneratedImage& image, std::size_t episode) const;
  std::vector<Trajectory> rollout(std::size_t agent, std::span<const PolicyValue> snapshot,
                                  std::uint64_t seed, std::size_t episodes,
                                  double gamma) const override;

  static std::vector<double> apply_action(std::vector<double> latent, std::size_t action);

 private:
  std::vector<double> start_latent(std::size_t agent, std::size_t episode) const;

  std::vector<ImageAgentSpec> agents_;
  std::vector<ImageEpisode> episodes_;
  std::shared_ptr<const ProjectionParams> projection_;
  std::size_t steps_;
};

enum class TrainingMode { sequential, simultaneous };
std::string_view to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view name);

struct TrainingRecord {
  std::size_t iteration = 0;
  std::size_t agent = 0;
  std::string agent_name;
  double mean_reward = 0.0;
  double mean_objective = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  std::optional<std::string> error;
};

struct TrainingLog {
  std::vector<TrainingRecord> records;

  // One JSON object per line.
  std::string to_json_lines() const;
};

// Sequential: agents roll out and update one at a time, each against the
// parameters as they stand at its turn. Simultaneous: every agent rolls out
// against the iteration-start snapshot, then all update. Episode RNG streams
// derive from (seed, agent, iteration). A failing rollout or update is logged
// and that agent's iteration skipped.
TrainingLog train_agents(std::vector<PolicyValue>& agents, const Environment& environment,
                         const PPOConfig& config, TrainingMode mode, std::size_t iterations,
                         std::uint64_t seed);

}  // namespace mats
