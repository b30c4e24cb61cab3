#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/numerics/softmax.hpp"
#include "mats/rl/ppo.hpp"
#include "mats/rl/training.hpp"
#include "oracles/gae_oracle.hpp"
#include "support/golden.hpp"
#include "support/ppo_checks.hpp"

using namespace mats;

namespace {

Trajectory random_trajectory(SplitMix64& rng, std::size_t len, bool end_terminal) {
  std::vector<Transition> ts;
  double v = rng.normal();
  for (std::size_t t = 0; t < len; ++t) {
    Transition x;
    x.state = {1.0};
    x.reward = rng.normal();
    x.value = v;
    v = rng.normal();
    x.next_value = v;
    x.terminal = end_terminal && t + 1 == len;
    ts.push_back(x);
  }
  return Trajectory::from(std::move(ts), 0.99);
}

std::vector<oracle::Step> oracle_steps(const Trajectory& tr) {
  std::vector<oracle::Step> s;
  for (const auto& t : tr.transitions) s.push_back({t.reward, t.value, t.next_value, t.terminal});
  return s;
}

// Fails rollouts for one agent and otherwise defers to a bandit.
class FlakyEnvironment final : public Environment {
 public:
  FlakyEnvironment(std::size_t bad_agent, bool nan_reward)
      : inner_({0.1, 0.9}, 2), bad_(bad_agent), nan_(nan_reward) {}
  std::size_t agent_count() const override { return 2; }
  std::vector<PolicyValue> make_agents(std::uint64_t seed) const {
    return inner_.make_agents(seed, 3e-4);
  }
  std::vector<Trajectory> rollout(std::size_t agent, std::span<const PolicyValue> snapshot,
                                  std::uint64_t seed, std::size_t episodes,
                                  double gamma) const override {
    auto out = inner_.rollout(agent, snapshot, seed, episodes, gamma);
    if (agent == bad_) {
      if (!nan_) throw std::runtime_error("renderer unavailable");
      out[0].transitions[0].reward = std::nan("");
    }
    return out;
  }

 private:
  BanditEnvironment inner_;
  std::size_t bad_;
  bool nan_;
};

}  // namespace

TEST_CASE("PPO presets") {
  const PPOConfig d;
  CHECK(d.clip_epsilon == 0.2);
  CHECK(d.gamma == 0.99);
  CHECK(d.learning_rate == 3e-4);
  CHECK(d.batch_size == 32);
  CHECK(d.epochs_per_batch == 10);
  CHECK(d.estimator() == AdvantageEstimator::gae);
  CHECK(PPOConfig::text_preset().learning_rate == 5e-5);
  CHECK(PPOConfig::text_preset().batch_size == 16);
  CHECK(PPOConfig::image_preset().batch_size == 8);
  CHECK(PPOConfig::image_preset().reward_preset == RewardPreset::image_sqd);
  CHECK(PPOConfig::from_preset("default").learning_rate == 3e-4);
  CHECK_THROWS_AS(PPOConfig::from_preset("huge"), ConfigError);
  PPOConfig bad;
  bad.clip_epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("compute_reward fixtures") {
  CHECK(compute_reward({std::nullopt, 1.0, 1.0, 1.0}, RewardPreset::image_sqd) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(compute_reward({std::nullopt, 0.0, 0.0, 0.0}, RewardPreset::image_sqd) == 0.0);
  TextMetricReport t;
  t.bleu = 1.0;
  t.rouge1_f1 = 0.8;
  t.coherence = 0.5;
  t.diversity = 0.2;
  CHECK(compute_reward({t, {}, {}, {}}, RewardPreset::text_eq2) ==
        doctest::Approx(0.76).epsilon(1e-15));
  CHECK(compute_reward({TextMetricReport{}, {}, {}, {}}, RewardPreset::text_eq2) == 0.0);
  CHECK_THROWS_AS(compute_reward({}, RewardPreset::text_eq2), InvalidArgument);
  CHECK_THROWS_AS(compute_reward({std::nullopt, 1.0, 1.0, {}}, RewardPreset::image_sqd),
                  InvalidArgument);
  CHECK(similarity_component(1.0) == 1.0);
  CHECK(similarity_component(-1.0) == 0.0);
  CHECK(similarity_component(0.0) == 0.5);
}

TEST_CASE("candidate diversity") {
  const Tensor a({2, 2, 3}, 0.0), b({2, 2, 3}, 1.0), c({2, 2, 3}, 0.5);
  const std::vector<Tensor> one{a};
  CHECK(candidate_diversity(one) == 0.0);
  const std::vector<Tensor> two{a, b};
  CHECK(candidate_diversity(two) == 1.0);
  const std::vector<Tensor> three{a, b, c};
  CHECK(candidate_diversity(three) == doctest::Approx((1.0 + 0.5 + 0.5) / 3.0).epsilon(1e-15));
  const std::vector<Tensor> mismatch{a, Tensor({2, 3, 3}, 0.0)};
  CHECK_THROWS_AS(candidate_diversity(mismatch), InvalidArgument);
}

TEST_CASE("one-step TD advantage") {
  PPOConfig cfg;
  cfg.gae_lambda.reset();
  Transition t;
  t.reward = 1.0;
  const auto est = compute_advantage(Trajectory::from({t}, 0.99), cfg);
  CHECK(est.estimator == AdvantageEstimator::one_step_td);
  CHECK(est.values == std::vector<double>{1.0});

  SplitMix64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto tr = random_trajectory(rng, 1 + rng.below(6), rng.uniform() < 0.5);
    const auto a = compute_advantage(tr, cfg).values;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& x = tr.transitions[i];
      CHECK(a[i] == x.reward + 0.99 * (x.terminal ? 0.0 : x.next_value) - x.value);
    }
    // GAE with lambda 0 collapses to the same TD errors.
    PPOConfig g0;
    g0.gae_lambda = 0.0;
    const auto b = compute_advantage(tr, g0).values;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-14));
  }
}

TEST_CASE("GAE matches the double-loop oracle") {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto tr = random_trajectory(rng, 1 + rng.below(10), rng.uniform() < 0.5);
    PPOConfig cfg;
    cfg.gamma = rng.uniform(0.5, 1.0);
    cfg.gae_lambda = rng.uniform();
    const auto got = compute_advantage(tr, cfg).values;
    const auto expect = oracle::gae(oracle_steps(tr), cfg.gamma, *cfg.gae_lambda);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  // A terminal step in the middle cuts the sum.
  std::vector<Transition> ts(3);
  for (auto& t : ts) t.reward = 1.0;
  ts[1].terminal = true;
  const auto a = compute_advantage(Trajectory::from(ts, 0.5), PPOConfig{}).values;
  CHECK(a[0] == doctest::Approx(1.0 + 0.99 * 0.95 * 1.0).epsilon(1e-15));
  CHECK(a[1] == 1.0);
  CHECK_THROWS_AS(compute_advantage(Trajectory{}, PPOConfig{}), InvalidArgument);
}

TEST_CASE("discounted episode return") {
  std::vector<Transition> ts(3);
  ts[0].reward = 1.0;
  ts[1].reward = 2.0;
  ts[2].reward = 4.0;
  CHECK(Trajectory::from(ts, 0.5).episode_return == 1.0 + 0.5 * 2.0 + 0.25 * 4.0);
}

TEST_CASE("clipped objective identities") {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const double lp = rng.uniform(-5.0, 0.0), a = rng.normal(), eps = rng.uniform(0.05, 0.5);
    CHECK(clipped_objective(lp, lp, a, eps) == a);
  }
  CHECK(clipped_objective(std::log(2.0), 0.0, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(clipped_objective(std::log(0.5), 0.0, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
  // Against the two-term definition.
  for (int trial = 0; trial < 1000; ++trial) {
    const double n = rng.uniform(-3.0, 0.0), o = rng.uniform(-3.0, 0.0);
    const double a = rng.uniform(-2.0, 2.0), eps = rng.uniform(0.05, 0.5);
    const double rho = std::exp(n - o);
    const double expect = std::min(rho * a, std::clamp(rho, 1.0 - eps, 1.0 + eps) * a);
    CHECK(clipped_objective(n, o, a, eps) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("policy gradient matches central differences") {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 120; ++s) {
    const auto g = ppo_checks::make_grad_case(derive_seed(2024, {s}));
    CHECK(g.policy.parameter_count() <= 200);
    worst = std::max(worst, ppo_checks::grad_case_error(g));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("zero advantages leave the policy unchanged") {
  auto agent = make_policy_value("a", 3, 4, 5, 3e-4);
  const auto before = agent.policy;
  std::vector<Transition> batch(4);
  SplitMix64 rng(6);
  for (auto& t : batch) {
    t.state = {rng.normal(), rng.normal(), rng.normal()};
    t.action = rng.below(4);
    t.old_log_prob = action_log_probs(agent.policy, std::span(&t, 1))[0];
    t.reward = 1.0;
    t.terminal = true;
  }
  const std::vector<double> zeros(batch.size(), 0.0);
  const auto stats = ppo_update(agent, batch, zeros, PPOConfig{});
  CHECK(agent.policy == before);
  CHECK(stats.objective_before == 0.0);
  CHECK(stats.value_loss_after < stats.value_loss_before);
}

TEST_CASE("positive advantage raises the taken action's probability") {
  SplitMix64 rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    auto agent = make_policy_value("a", 2, 3, rng.next_u64(), 3e-4);
    Transition t;
    t.state = {rng.normal(), rng.normal()};
    t.action = rng.below(3);
    t.old_log_prob = action_log_probs(agent.policy, std::span(&t, 1))[0];
    const double before = std::exp(t.old_log_prob);
    const std::vector<double> adv{0.5 + rng.uniform()};
    ppo_update(agent, std::span(&t, 1), adv, PPOConfig{});
    CHECK(std::exp(action_log_probs(agent.policy, std::span(&t, 1))[0]) > before);
  }
}

TEST_CASE("ppo_update rejects non-finite advantages and keeps parameters") {
  auto agent = make_policy_value("a", 1, 2, 7, 3e-4);
  const auto before = agent.policy;
  Transition t;
  t.state = {1.0};
  const std::vector<double> adv{std::nan("")};
  CHECK_THROWS_AS(ppo_update(agent, std::span(&t, 1), adv, PPOConfig{}), NumericError);
  CHECK(agent.policy == before);
  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(ppo_update(agent, std::span(&t, 1), two, PPOConfig{}), InvalidArgument);
}

TEST_CASE("single-agent bandit converges") {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    hits += ppo_checks::bandit_iterations_to(0.9, seed) <= 500 ? 1 : 0;
  CHECK(hits == 3);
}

TEST_CASE("training modes agree for one agent") {
  BanditEnvironment env(ppo_checks::bandit_arms());
  auto a = env.make_agents(3, 3e-4);
  auto b = env.make_agents(3, 3e-4);
  const auto la = train_agents(a, env, PPOConfig{}, TrainingMode::sequential, 15, 9);
  const auto lb = train_agents(b, env, PPOConfig{}, TrainingMode::simultaneous, 15, 9);
  CHECK(la.to_json_lines() == lb.to_json_lines());
  CHECK(a[0].policy == b[0].policy);
}

TEST_CASE("training is deterministic") {
  BanditEnvironment env({0.3, 0.6, 0.2}, 3, 0.5);
  for (auto mode : {TrainingMode::sequential, TrainingMode::simultaneous}) {
    auto a = env.make_agents(4, 3e-4);
    auto b = env.make_agents(4, 3e-4);
    const auto la = train_agents(a, env, PPOConfig{}, mode, 10, 21);
    const auto lb = train_agents(b, env, PPOConfig{}, mode, 10, 21);
    CHECK(la.to_json_lines() == lb.to_json_lines());
    CHECK(la.records.size() == 30);
  }
  auto a = env.make_agents(4, 3e-4);
  auto b = env.make_agents(4, 3e-4);
  const auto seq = train_agents(a, env, PPOConfig{}, TrainingMode::sequential, 10, 21);
  const auto sim = train_agents(b, env, PPOConfig{}, TrainingMode::simultaneous, 10, 21);
  // With coupling, later agents see earlier updates only in sequential mode.
  CHECK(seq.to_json_lines() != sim.to_json_lines());
}

TEST_CASE("coupled three-agent bandit records reward trends") {
  BanditEnvironment env({0.3, 0.6, 0.2, 0.5}, 3, 0.4);
  auto agents = env.make_agents(8, 3e-4);
  const auto log = train_agents(agents, env, PPOConfig{}, TrainingMode::simultaneous, 200, 8);
  REQUIRE(log.records.size() == 600);
  for (const auto& r : log.records) {
    CHECK_FALSE(r.error);
    CHECK(std::isfinite(r.mean_reward));
  }
  CHECK(log.records[3].iteration == 1);
  CHECK(log.records[3].agent == 0);
  CHECK(log.records[599].agent_name == "bandit:2");
}

TEST_CASE("rollout and update failures are logged and skipped") {
  for (bool nan_reward : {false, true}) {
    FlakyEnvironment env(1, nan_reward);
    auto agents = env.make_agents(2);
    const auto frozen = agents[1].policy;
    const auto log = train_agents(agents, env, PPOConfig{}, TrainingMode::sequential, 5, 3);
    REQUIRE(log.records.size() == 10);
    for (const auto& r : log.records) {
      if (r.agent == 1)
        CHECK(r.error.has_value());
      else
        CHECK_FALSE(r.error.has_value());
    }
    CHECK(agents[1].policy == frozen);
    CHECK(log.to_json_lines().find("\"error\"") != std::string::npos);
  }
}

TEST_CASE("sample_action respects masks and probabilities") {
  const auto policy = make_mlp({1, 4, 3}, {Activation::tanh, Activation::identity}, 5);
  const auto state = BanditEnvironment::state();
  const std::vector<std::uint8_t> mask{0, 1, 0};
  SplitMix64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto a = sample_action(policy, state, mask, rng);
    CHECK(a.action == 1);
    CHECK(a.log_prob == doctest::Approx(0.0).epsilon(1e-12));
  }
  const auto p = action_probabilities(policy, state);
  double s = 0.0;
  for (double v : p) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> counts(3, 0.0);
  for (int i = 0; i < 20000; ++i) counts[sample_action(policy, state, {}, rng).action] += 1.0;
  for (std::size_t j = 0; j < 3; ++j) CHECK(counts[j] / 20000.0 == doctest::Approx(p[j]).epsilon(0.05));
}

TEST_CASE("image latent environment") {
  const auto latent = std::vector<double>(kLatentDim, 0.0);
  auto moved = ImageLatentEnvironment::apply_action(latent, 0);
  CHECK(moved[0] == kLatentDelta);
  // Actions alternate +delta, -delta per dimension.
  moved = ImageLatentEnvironment::apply_action(latent, 5);
  CHECK(moved[2] == -kLatentDelta);
  CHECK_THROWS_AS(ImageLatentEnvironment::apply_action(latent, kLatentActions), InvalidArgument);
  CHECK(ImageLatentEnvironment::apply_action(latent, kLatentActions - 1) == latent);

  const auto roster = golden::roster();
  const auto cfg = ConsistencyConfig::with_seed(42);
  ImageLatentEnvironment env(roster.image, {{"stone castle at dusk", {"castle", "stone"}}},
                             cfg.projection, 2);
  auto agents = env.make_agents(1, 5e-5);
  REQUIRE(agents.size() == 3);
  const auto t = env.rollout(0, agents, 7, 2, 0.99);
  REQUIRE(t.size() == 2);
  CHECK(t[0].transitions.size() == 2);
  CHECK(t[0].transitions.back().terminal);
  for (const auto& tr : t) {
    CHECK(tr.transitions.back().reward >= 0.0);
    CHECK(tr.transitions.back().reward <= 1.0);
  }
  const auto again = env.rollout(0, agents, 7, 2, 0.99);
  CHECK(again[1].transitions.back().reward == t[1].transitions.back().reward);
}

TEST_CASE("text enhancement environment") {
  const auto roster = golden::roster();
  std::vector<TextEpisode> episodes;
  for (const auto& sc : load_suite(MATS_TEST_SUITE)) episodes.push_back({sc.prompt, sc.reference});
  TextEnhancementEnvironment env(roster.text, roster.routing, episodes);
  auto agents = env.make_agents(1, 5e-5);
  REQUIRE(agents.size() == 4);
  const auto team = env.team_with(agents);
  CHECK(team.expander.policy == roster.text.expander.policy);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto t = env.rollout(k, agents, 11, 1, 0.99);
    REQUIRE(t.size() == 1);
    const auto& last = t[0].transitions.back();
    CHECK(last.terminal);
    CHECK(last.reward >= 0.0);
    CHECK(last.reward <= 1.0);
  }
  TextEnhancementEnvironment castle_only(roster.text, roster.routing,
                                         {{"medieval castle", "a stone castle"}});
  CHECK_THROWS_AS(castle_only.rollout(2, agents, 1, 1, 0.99), InvalidArgument);
  CHECK(parse_training_mode("sequential") == TrainingMode::sequential);
  CHECK_THROWS_AS(parse_training_mode("async"), ConfigError);
}
