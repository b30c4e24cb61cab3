#include <algorithm>
#include <chrono>
#include <functional>

#include "mats/consistency.hpp"
#include "mats/error.hpp"
#include "mats/harness/harness.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/text_metrics.hpp"

namespace mats {

namespace {

using Clock = std::chrono::steady_clock;

constexpr FusionMethod kMultiAgentFusion = FusionMethod::dynamic_weight;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Context {
  const ExperimentConfig& config;
  std::vector<ScenarioSpec> scenarios;  // suite order
  std::vector<std::size_t> by_name;     // indices sorted by scenario name
  AgentRoster roster;
  ConsistencyConfig consistency;
  std::string digest;

  RunRecord record(const ScenarioSpec& s, std::string condition) const {
    RunRecord r;
    r.experiment = config.experiment;
    r.scenario = s.name;
    r.condition = std::move(condition);
    r.seed = config.seed;
    r.config_digest = digest;
    return r;
  }

  FusionParams fusion_params(const ScenarioSpec& s) const {
    FusionParams p;
    p.seed = derive_seed(config.seed, {7});
    p.prompt_tags = keyword_extract(tokenize(s.prompt));
    return p;
  }
};

Context make_context(const ExperimentConfig& config) {
  config.validate();
  Context ctx{config, load_suite(config.suite), {}, {}, ConsistencyConfig::with_seed(config.seed),
              config.digest()};
  ctx.by_name.resize(ctx.scenarios.size());
  for (std::size_t i = 0; i < ctx.by_name.size(); ++i) ctx.by_name[i] = i;
  std::sort(ctx.by_name.begin(), ctx.by_name.end(), [&](std::size_t a, std::size_t b) {
    return ctx.scenarios[a].name < ctx.scenarios[b].name;
  });
  ctx.roster = load_agents(config.data_dir, config.seed,
                           RendererConfig{config.image_size, config.image_size, 3});
  return ctx;
}

// Runs `body` for each scenario in name order; an exception turns into one
// error record per condition.
void for_each_scenario(const Context& ctx, const std::vector<std::string>& conditions,
                       std::vector<RunRecord>& out,
                       const std::function<void(std::size_t, std::vector<RunRecord>&)>& body) {
  for (std::size_t idx : ctx.by_name) {
    std::vector<RunRecord> local;
    try {
      body(idx, local);
    } catch (const std::exception& e) {
      local.clear();
      for (const auto& c : conditions) {
        auto r = ctx.record(ctx.scenarios[idx], c);
        r.error = e.what();
        local.push_back(std::move(r));
      }
    }
    std::move(local.begin(), local.end(), std::back_inserter(out));
  }
}

void text_metrics(RunRecord& r, const Tokens& output, const ScenarioSpec& s) {
  const auto m = evaluate_text(join(output), s.reference);
  r.set("bleu", m.bleu);
  r.set("rouge1_f1", m.rouge1_f1);
  r.set("word_count", static_cast<double>(m.word_count));
  r.set("coherence", m.coherence);
  r.set("diversity", m.diversity);
  r.set("text_reward", text_reward(m, RewardWeights::text_preset()));
}

std::vector<GeneratedImage> candidates(const Context& ctx, const ScenarioSpec& s) {
  const auto tokens = tokenize(s.prompt);
  const auto features = embed_text(tokens);
  const auto kw = keyword_extract(tokens);
  const TagSet tags(kw.begin(), kw.end());
  std::vector<GeneratedImage> out;
  for (const auto& agent : ctx.roster.image)
    out.push_back(generate_image(agent, route_features(agent, features.values), tags));
  return out;
}

double shared_similarity(const Context& ctx, const ScenarioSpec& s, const GeneratedImage& img) {
  const auto& proj = ctx.consistency.shared_projection();
  const auto t = project_to_shared(embed_text(s.prompt).values, Modality::text, proj);
  const auto v = project_to_shared(extract_image_features(img.pixels).values, Modality::image, proj);
  return similarity_component(cosine_similarity(t.values, v.values));
}

void image_metrics(const Context& ctx, RunRecord& r, const GeneratedImage& image,
                   std::span<const GeneratedImage> pool, const ScenarioSpec& s) {
  const double quality = image_quality_score(image);
  const double similarity = text_tag_similarity(s.prompt, image);
  std::vector<Tensor> pixels;
  for (const auto& g : pool) pixels.push_back(g.pixels);
  RewardSample sample;
  sample.similarity = shared_similarity(ctx, s, image);
  sample.quality = quality;
  sample.diversity = candidate_diversity(pixels);
  const auto report = evaluate_integration(s.prompt, image, IntegrationDirection::bidirectional,
                                           s.concepts, ctx.consistency);
  r.set("quality", quality);
  r.set("similarity", similarity);
  r.set("overall", overall_score(quality, similarity));
  r.set("image_reward", compute_reward(sample, RewardPreset::image_sqd));
  r.set("consistency_score", report.score);
  r.set("concept_coverage", report.concept_coverage);
}

std::vector<RunRecord> exp_text_agents(const Context& ctx) {
  std::vector<RunRecord> out;
  for_each_scenario(ctx, {"single_agent", "multi_agent"}, out, [&](std::size_t i, auto& local) {
    const auto& s = ctx.scenarios[i];
    const auto prompt = tokenize(s.prompt);
    auto t0 = Clock::now();
    auto single = ctx.record(s, "single_agent");
    text_metrics(single, prompt, s);
    single.elapsed_seconds = seconds_since(t0);
    t0 = Clock::now();
    auto multi = ctx.record(s, "multi_agent");
    text_metrics(multi, multi_agent_enhance(prompt, ctx.roster.text, ctx.roster.routing).tokens, s);
    multi.elapsed_seconds = seconds_since(t0);
    local.push_back(std::move(single));
    local.push_back(std::move(multi));
  });
  return out;
}

std::vector<RunRecord> exp_text_ppo(const Context& ctx, TrainingLog* log) {
  const auto ppo = ctx.config.ppo();
  std::vector<TextEpisode> episodes;
  for (const auto& s : ctx.scenarios) episodes.push_back({s.prompt, s.reference});
  TextEnhancementEnvironment env(ctx.roster.text, ctx.roster.routing, episodes);
  auto agents = env.make_agents(derive_seed(ctx.config.seed, {2}), ppo.learning_rate);

  auto evaluate = [&](const char* condition) {
    const auto team = env.team_with(agents);
    std::vector<RunRecord> recs;
    for_each_scenario(ctx, {condition}, recs, [&](std::size_t i, auto& local) {
      const auto& s = ctx.scenarios[i];
      const auto t0 = Clock::now();
      auto r = ctx.record(s, condition);
      text_metrics(r, multi_agent_enhance(tokenize(s.prompt), team, ctx.roster.routing).tokens, s);
      r.elapsed_seconds = seconds_since(t0);
      local.push_back(std::move(r));
    });
    return recs;
  };
  auto before = evaluate("before_rl");
  auto trained = train_agents(agents, env, ppo, TrainingMode::simultaneous,
                              ctx.config.training_iterations, derive_seed(ctx.config.seed, {22}));
  auto after = evaluate("after_rl");
  if (log) std::move(trained.records.begin(), trained.records.end(), std::back_inserter(log->records));

  std::vector<RunRecord> out;
  for (std::size_t k = 0; k < before.size(); ++k) {
    out.push_back(std::move(before[k]));
    out.push_back(std::move(after[k]));
  }
  return out;
}

std::vector<RunRecord> exp_image_agents(const Context& ctx) {
  std::vector<RunRecord> out;
  for_each_scenario(ctx, {"single_agent", "multi_agent"}, out, [&](std::size_t i, auto& local) {
    const auto& s = ctx.scenarios[i];
    auto t0 = Clock::now();
    const auto cands = candidates(ctx, s);
    const auto& single_image = cands.at(static_cast<std::size_t>(s.domain));
    auto single = ctx.record(s, "single_agent");
    image_metrics(ctx, single, single_image, std::span(&single_image, 1), s);
    single.elapsed_seconds = seconds_since(t0);
    t0 = Clock::now();
    auto multi = ctx.record(s, "multi_agent");
    image_metrics(ctx, multi, fuse(cands, kMultiAgentFusion, ctx.fusion_params(s)), cands, s);
    multi.elapsed_seconds = seconds_since(t0);
    local.push_back(std::move(single));
    local.push_back(std::move(multi));
  });
  return out;
}

std::vector<RunRecord> exp_image_ppo(const Context& ctx, TrainingLog* log) {
  const auto ppo = ctx.config.ppo();
  std::vector<ImageEpisode> episodes;
  for (const auto& s : ctx.scenarios) {
    const auto kw = keyword_extract(tokenize(s.prompt));
    episodes.push_back({s.prompt, TagSet(kw.begin(), kw.end())});
  }
  ImageLatentEnvironment env(ctx.roster.image, episodes, ctx.consistency.projection);
  auto agents = env.make_agents(derive_seed(ctx.config.seed, {4}), ppo.learning_rate);

  auto evaluate = [&](const char* condition) {
    std::vector<RunRecord> recs;
    for_each_scenario(ctx, {condition}, recs, [&](std::size_t i, auto& local) {
      const auto& s = ctx.scenarios[i];
      const auto t0 = Clock::now();
      std::vector<GeneratedImage> imgs;
      for (std::size_t k = 0; k < agents.size(); ++k) imgs.push_back(env.greedy_image(k, agents[k], i));
      auto r = ctx.record(s, condition);
      image_metrics(ctx, r, fuse(imgs, kMultiAgentFusion, ctx.fusion_params(s)), imgs, s);
      r.elapsed_seconds = seconds_since(t0);
      local.push_back(std::move(r));
    });
    return recs;
  };
  auto before = evaluate("before_rl");
  auto trained = train_agents(agents, env, ppo, TrainingMode::simultaneous,
                              ctx.config.training_iterations, derive_seed(ctx.config.seed, {44}));
  auto after = evaluate("after_rl");
  if (log) std::move(trained.records.begin(), trained.records.end(), std::back_inserter(log->records));

  std::vector<RunRecord> out;
  for (std::size_t k = 0; k < before.size(); ++k) {
    out.push_back(std::move(before[k]));
    out.push_back(std::move(after[k]));
  }
  return out;
}

std::vector<RunRecord> exp_fusion(const Context& ctx) {
  std::vector<RunRecord> out;
  for_each_scenario(ctx, experiment_conditions(ctx.config), out, [&](std::size_t i, auto& local) {
    const auto& s = ctx.scenarios[i];
    const auto cands = candidates(ctx, s);
    const auto reports = benchmark_fusion(
        cands, ctx.config.fusion,
        [&](const GeneratedImage& img) { return text_tag_similarity(s.prompt, img); },
        ctx.fusion_params(s));
    for (const auto& rep : reports) {
      auto r = ctx.record(s, rep.method);
      r.elapsed_seconds = rep.elapsed_seconds;
      if (rep.error) {
        r.error = rep.error;
      } else {
        r.set("quality", rep.quality);
        r.set("similarity", rep.similarity);
        r.set("overall", rep.overall);
      }
      local.push_back(std::move(r));
    }
  });
  return out;
}

std::vector<RunRecord> exp_integration(const Context& ctx) {
  std::vector<RunRecord> out;
  for_each_scenario(ctx, experiment_conditions(ctx.config), out, [&](std::size_t i, auto& local) {
    const auto& s = ctx.scenarios[i];
    const auto cands = candidates(ctx, s);
    const auto fused = fuse(cands, kMultiAgentFusion, ctx.fusion_params(s));
    for (auto d : kAllDirections) {
      const auto t0 = Clock::now();
      const auto rep = evaluate_integration(s.prompt, fused, d, s.concepts, ctx.consistency);
      auto r = ctx.record(s, std::string(to_string(d)));
      r.set("consistency_score", rep.score);
      r.set("contrastive_loss", rep.contrastive_loss);
      r.set("cos_sim", rep.cos_sim);
      r.set("obj_valid", rep.obj_valid);
      r.set("clip_similarity", rep.clip_similarity);
      r.set("concept_coverage", rep.concept_coverage);
      r.set("semantic_alignment", rep.semantic_alignment);
      r.elapsed_seconds = seconds_since(t0);
      local.push_back(std::move(r));
    }
  });
  return out;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, TrainingLog* training_log) {
  const Context ctx = make_context(config);
  switch (config.experiment) {
    case 1: return exp_text_agents(ctx);
    case 2: return exp_text_ppo(ctx, training_log);
    case 3: return exp_image_agents(ctx);
    case 4: return exp_image_ppo(ctx, training_log);
    case 5: return exp_fusion(ctx);
    case 6: return exp_integration(ctx);
  }
  throw ConfigError("experiment out of range");
}

}  // namespace mats
