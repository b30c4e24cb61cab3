#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mats/agents/agents.hpp"
#include "mats/fusion.hpp"
#include "mats/rl/ppo.hpp"
#include "mats/rl/training.hpp"

namespace mats {

// ---------------------------------------------------------------- scenarios

struct ScenarioSpec {
  std::string name;
  std::string prompt;
  std::string reference;
  Domain domain = Domain::architecture;
  std::vector<std::string> concepts;
};

// `name <TAB> prompt <TAB> reference <TAB> domain <TAB> concept[,concept...]`
// per line; blank lines and '#' comments skipped. ConfigError on malformed
// lines, empty prompt/reference or duplicate names.
std::vector<ScenarioSpec> parse_suite(std::string_view content);
std::vector<ScenarioSpec> load_suite(const std::filesystem::path& path);
std::filesystem::path default_suite_path();

// ------------------------------------------------------------------- config

inline constexpr int kExperimentCount = 6;

struct ExperimentConfig {
  int experiment = 1;
  std::uint64_t seed = 42;
  std::filesystem::path suite = default_suite_path();
  std::filesystem::path data_dir = default_data_dir();
  std::size_t image_size = 64;
  std::vector<FusionSpec> fusion = all_fusion_specs();
  // Unset: "text" for experiment 2, "image" for experiment 4.
  std::optional<std::string> ppo_preset;
  std::size_t training_iterations = 20;
  LoRAConfig lora;

  void validate() const;
  PPOConfig ppo() const;
  // Canonical JSON of every score-affecting field. The suite enters by
  // content digest, not path.
  nlohmann::ordered_json canonical_json() const;
  std::string digest() const;
};

// ------------------------------------------------------------------ records

// Every metric name a RunRecord may carry.
const std::vector<std::string>& metric_registry();
// Metric columns for one experiment, in output order.
const std::vector<std::string>& experiment_metrics(int experiment);

struct RunRecord {
  int experiment = 0;
  std::string scenario;
  std::string condition;
  std::map<std::string, double> metrics;
  double elapsed_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::optional<std::string> error;

  // Throws InvalidArgument on a metric outside the registry.
  void set(const std::string& metric, double value);
};

inline constexpr int kRecordSchemaVersion = 1;

nlohmann::ordered_json to_json(const RunRecord& record, bool include_timing = true);
RunRecord record_from_json(const nlohmann::json& j);

// Conditions of an experiment in display order; exp5/exp6 take them from the
// config (fusion names) or the direction list.
std::vector<std::string> experiment_conditions(const ExperimentConfig& config);

// Runs one experiment over the suite. Records are ordered by scenario name,
// then by condition order. A failing scenario yields error records.
// Experiments 2 and 4 append their PPO log to `training_log` when given.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      TrainingLog* training_log = nullptr);

// ------------------------------------------------------------------ summary

// 100 (after - before) / before; NaN when before == 0.
double relative_change(double before, double after);
double round_to(double value, int decimals);
// "-69.7%", "+1251.1%", "n/a" for NaN.
std::string format_percent(double change);

struct SummaryRow {
  std::string metric;
  std::vector<double> means;  // one per condition
  std::optional<double> change;  // first -> second condition, paired experiments only
};

struct SummaryTable {
  int experiment = 0;
  std::vector<std::string> conditions;
  std::vector<SummaryRow> rows;
  std::size_t scenario_count = 0;
};

// Per-condition means over scenarios (error records skipped). The change
// column is filled when there are exactly two conditions. Throws
// InvalidArgument on empty input or mixed experiment ids.
SummaryTable aggregate(std::span<const RunRecord> records,
                       std::span<const std::string> condition_order = {});

std::string summary_csv(const SummaryTable& table);
SummaryTable parse_summary_csv(std::string_view content, int experiment);
std::string summary_markdown(const SummaryTable& table);
// Long-form score table: Experiment,Scenario,Condition,<metrics>,Error.
std::string scores_csv(int experiment, std::span<const RunRecord> records);

// --------------------------------------------------------------------- emit

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::size_t bytes = 0;
  std::string digest;
};

struct Manifest {
  int experiment = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string score_digest;  // over records with timing removed
  std::vector<ManifestEntry> files;
  std::optional<std::string> error;
};

std::string content_digest(std::string_view bytes);

// Writes scores.csv, summary.csv, summary.md, records.jsonl (plus
// exp5_fusion.csv for experiment 5 and training.jsonl when a log is given),
// then manifest.json. On an I/O failure the
// partial manifest is still written when possible and IoError is thrown.
Manifest emit(const ExperimentConfig& config, std::span<const RunRecord> records,
              const std::filesystem::path& out_dir, const TrainingLog* training_log = nullptr);

nlohmann::ordered_json to_json(const Manifest& manifest);

// Rebuilds the summary from records.jsonl in `dir`.
SummaryTable load_summary(const std::filesystem::path& dir);
std::vector<RunRecord> load_records(const std::filesystem::path& path);

}  // namespace mats
