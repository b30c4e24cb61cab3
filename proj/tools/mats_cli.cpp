#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mats/consistency.hpp"
#include "mats/error.hpp"
#include "mats/fusion.hpp"
#include "mats/harness/harness.hpp"
#include "mats/harness/image_io.hpp"
#include "mats/rl/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::filesystem::path default_out_dir(int experiment) {
  std::filesystem::path base = "runs";
  if (const char* env = std::getenv("MATS_OUT_DIR"); env && *env) base = env;
  return base / fmt::format("exp{}", experiment);
}

mats::TagSet split_tags(const std::string& csv) {
  mats::TagSet out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto end = csv.find(',', start);
    auto tag = csv.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!tag.empty()) out.insert(tag);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

struct RunArgs {
  int experiment = 0;
  std::uint64_t seed = 42;
  std::string scenarios;
  std::string out;
  std::string fusion;
  std::size_t image_size = 64;
  std::string ppo_preset;
  std::size_t iterations = 20;
  std::string data_dir;
};

int cmd_run(const RunArgs& a) {
  mats::ExperimentConfig cfg;
  cfg.experiment = a.experiment;
  cfg.seed = a.seed;
  if (!a.scenarios.empty()) cfg.suite = a.scenarios;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  if (!a.fusion.empty()) cfg.fusion = mats::parse_fusion_list(a.fusion);
  cfg.image_size = a.image_size;
  if (!a.ppo_preset.empty()) cfg.ppo_preset = a.ppo_preset;
  cfg.training_iterations = a.iterations;
  cfg.validate();
  const auto out = a.out.empty() ? default_out_dir(a.experiment) : std::filesystem::path(a.out);

  mats::TrainingLog log;
  const bool trains = cfg.experiment == 2 || cfg.experiment == 4;
  const auto records = mats::run_experiment(cfg, trains ? &log : nullptr);
  const auto manifest = mats::emit(cfg, records, out, trains ? &log : nullptr);
  std::size_t errors = 0;
  for (const auto& r : records) errors += r.error ? 1 : 0;
  fmt::print("experiment {}: {} records ({} errors) -> {}\n", cfg.experiment, records.size(),
             errors, out.string());
  fmt::print("score digest {}\n", manifest.score_digest);
  return kExitOk;
}

int cmd_report(const std::string& in, const std::string& format) {
  const auto table = mats::load_summary(in);
  std::cout << (format == "md" ? mats::summary_markdown(table) : mats::summary_csv(table));
  return kExitOk;
}

int cmd_fuse(const std::vector<std::string>& inputs, const std::string& method,
             const std::string& out, const std::string& tags, std::uint64_t seed) {
  const auto spec = mats::parse_fusion_spec(method);
  std::vector<mats::GeneratedImage> images;
  for (const auto& path : inputs) {
    mats::GeneratedImage g;
    g.pixels = mats::read_ppm(path);
    g.concept_tags = split_tags(tags);
    g.provenance.agent_id = "file:" + path;
    images.push_back(std::move(g));
  }
  mats::FusionParams params;
  params.seed = seed;
  params.extra_layers = spec.extra_layers;
  params.prompt_tags = split_tags(tags);
  const auto fused = mats::fuse(images, spec.method, params);
  mats::write_ppm(out, fused.pixels);
  fmt::print("{}: quality {:.3f} -> {}\n", spec.name, mats::image_quality_score(fused), out);
  return kExitOk;
}

int cmd_consistency(const std::string& text, const std::string& image_path,
                    const std::string& direction, const std::string& tags,
                    const std::string& concepts, std::uint64_t seed) {
  mats::GeneratedImage image;
  image.pixels = mats::read_ppm(image_path);
  image.concept_tags = split_tags(tags);
  const auto c = split_tags(concepts);
  const std::vector<std::string> concept_list(c.begin(), c.end());
  const auto report =
      mats::evaluate_integration(text, image, mats::parse_direction(direction), concept_list,
                                 mats::ConsistencyConfig::with_seed(seed));
  std::cout << mats::to_json(report).dump(2) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string agents = "bandit";
  std::string mode = "sequential";
  std::size_t iterations = 50;
  std::uint64_t seed = 42;
  std::string ppo_preset = "default";
  std::string out;
  std::string scenarios;
  std::string data_dir;
};

int cmd_train(const TrainArgs& a) {
  const auto mode = mats::parse_training_mode(a.mode);
  const auto cfg = mats::PPOConfig::from_preset(a.ppo_preset);
  mats::TrainingLog log;
  if (a.agents == "bandit") {
    mats::BanditEnvironment env({0.2, 0.5, 1.0, 0.1});
    auto agents = env.make_agents(a.seed, cfg.learning_rate);
    log = mats::train_agents(agents, env, cfg, mode, a.iterations, a.seed);
  } else if (a.agents == "text" || a.agents == "image") {
    const auto suite = mats::load_suite(a.scenarios.empty() ? mats::default_suite_path()
                                                            : std::filesystem::path(a.scenarios));
    const auto roster =
        mats::load_agents(a.data_dir.empty() ? mats::default_data_dir() : std::filesystem::path(a.data_dir), a.seed);
    if (a.agents == "text") {
      std::vector<mats::TextEpisode> eps;
      for (const auto& s : suite) eps.push_back({s.prompt, s.reference});
      mats::TextEnhancementEnvironment env(roster.text, roster.routing, eps);
      auto agents = env.make_agents(a.seed, cfg.learning_rate);
      log = mats::train_agents(agents, env, cfg, mode, a.iterations, a.seed);
    } else {
      std::vector<mats::ImageEpisode> eps;
      for (const auto& s : suite) {
        const auto kw = mats::keyword_extract(mats::tokenize(s.prompt));
        eps.push_back({s.prompt, mats::TagSet(kw.begin(), kw.end())});
      }
      const auto consistency = mats::ConsistencyConfig::with_seed(a.seed);
      mats::ImageLatentEnvironment env(roster.image, eps, consistency.projection);
      auto agents = env.make_agents(a.seed, cfg.learning_rate);
      log = mats::train_agents(agents, env, cfg, mode, a.iterations, a.seed);
    }
  } else {
    throw mats::ConfigError("unknown agent set '" + a.agents + "' (bandit|text|image)");
  }
  if (a.out.empty()) {
    std::cout << log.to_json_lines();
  } else {
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    out << log.to_json_lines();
    if (!out) throw mats::IoError("cannot write " + a.out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent text/image generation experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its artifacts");
  run_cmd->add_option("--experiment", run.experiment, "Experiment id")
      ->required()
      ->check(CLI::Range(1, mats::kExperimentCount));
  run_cmd->add_option("--seed", run.seed, "Base seed")->capture_default_str();
  run_cmd->add_option("--scenarios", run.scenarios, "Scenario suite file");
  run_cmd->add_option("--out", run.out, "Output directory (default $MATS_OUT_DIR/expN)");
  run_cmd->add_option("--fusion", run.fusion, "Comma-separated fusion methods");
  run_cmd->add_option("--image-size", run.image_size, "Image height and width")
      ->capture_default_str();
  run_cmd->add_option("--ppo-preset", run.ppo_preset, "default|text|image");
  run_cmd->add_option("--iterations", run.iterations, "PPO iterations (experiments 2, 4)")
      ->capture_default_str();
  run_cmd->add_option("--data-dir", run.data_dir, "Lexicon data directory");

  std::string report_in, report_format = "md";
  auto* report_cmd = app.add_subcommand("report", "Rebuild the summary table of a run");
  report_cmd->add_option("--in", report_in, "Run output directory")->required();
  report_cmd->add_option("--format", report_format, "md|csv")
      ->check(CLI::IsMember({"md", "csv"}))
      ->capture_default_str();

  std::vector<std::string> fuse_inputs;
  std::string fuse_method, fuse_out = "fused.ppm", fuse_tags;
  std::uint64_t fuse_seed = 42;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse PPM images");
  fuse_cmd->add_option("--inputs", fuse_inputs, "Input P6 images")->required()->expected(2, -1);
  fuse_cmd->add_option("--method", fuse_method, "Fusion method")->required();
  fuse_cmd->add_option("--out", fuse_out, "Output image")->capture_default_str();
  fuse_cmd->add_option("--tags", fuse_tags, "Comma-separated concept tags");
  fuse_cmd->add_option("--seed", fuse_seed, "Seed")->capture_default_str();

  std::string cons_text, cons_image, cons_direction = "bidirectional", cons_tags, cons_concepts;
  std::uint64_t cons_seed = 42;
  auto* cons_cmd = app.add_subcommand("consistency", "Score a text/image pair");
  cons_cmd->add_option("--text", cons_text, "Text")->required();
  cons_cmd->add_option("--image", cons_image, "P6 image")->required();
  cons_cmd->add_option("--direction", cons_direction, "text_to_image|image_to_text|bidirectional")
      ->check(CLI::IsMember({"text_to_image", "image_to_text", "bidirectional"}))
      ->capture_default_str();
  cons_cmd->add_option("--tags", cons_tags, "Comma-separated image concept tags");
  cons_cmd->add_option("--concepts", cons_concepts, "Comma-separated expected concepts");
  cons_cmd->add_option("--seed", cons_seed, "Seed")->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train agents with PPO and print the log");
  train_cmd->add_option("--agents", train.agents, "bandit|text|image")
      ->check(CLI::IsMember({"bandit", "text", "image"}))
      ->capture_default_str();
  train_cmd->add_option("--mode", train.mode, "sequential|simultaneous")
      ->check(CLI::IsMember({"sequential", "simultaneous"}))
      ->capture_default_str();
  train_cmd->add_option("--iterations", train.iterations, "Iterations")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Seed")->capture_default_str();
  train_cmd->add_option("--ppo-preset", train.ppo_preset, "default|text|image")
      ->capture_default_str();
  train_cmd->add_option("--out", train.out, "Log file (default stdout)");
  train_cmd->add_option("--scenarios", train.scenarios, "Scenario suite file");
  train_cmd->add_option("--data-dir", train.data_dir, "Lexicon data directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*report_cmd) return cmd_report(report_in, report_format);
    if (*fuse_cmd) return cmd_fuse(fuse_inputs, fuse_method, fuse_out, fuse_tags, fuse_seed);
    if (*cons_cmd)
      return cmd_consistency(cons_text, cons_image, cons_direction, cons_tags, cons_concepts,
                             cons_seed);
    if (*train_cmd) return cmd_train(train);
  } catch (const mats::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
