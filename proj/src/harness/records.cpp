#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mats/consistency.hpp"
#include "mats/error.hpp"
#include "mats/harness/harness.hpp"

namespace mats {

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------- scenarios

std::vector<ScenarioSpec> parse_suite(std::string_view content) {
  std::vector<ScenarioSpec> out;
  std::set<std::string> names;
  std::size_t line_no = 0;
  for (const auto& raw : split(content, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 5)
      throw ConfigError(fmt::format("suite line {}: expected 5 tab-separated fields, got {}",
                                    line_no, fields.size()));
    ScenarioSpec s;
    s.name = trim(fields[0]);
    s.prompt = trim(fields[1]);
    s.reference = trim(fields[2]);
    if (s.name.empty() || s.prompt.empty() || s.reference.empty())
      throw ConfigError(fmt::format("suite line {}: empty name, prompt or reference", line_no));
    try {
      s.domain = parse_domain(trim(fields[3]));
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("suite line {}: {}", line_no, e.what()));
    }
    for (const auto& c : split(fields[4], ','))
      if (auto t = trim(c); !t.empty()) s.concepts.push_back(std::move(t));
    if (!names.insert(s.name).second)
      throw ConfigError(fmt::format("suite line {}: duplicate scenario '{}'", line_no, s.name));
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ConfigError("suite has no scenarios");
  return out;
}

std::vector<ScenarioSpec> load_suite(const std::filesystem::path& path) {
  std::string content;
  try {
    content = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("scenario suite: ") + e.what());
  }
  return parse_suite(content);
}

std::filesystem::path default_suite_path() { return MATS_DEFAULT_SUITE; }

// ------------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (experiment < 1 || experiment > kExperimentCount)
    throw ConfigError(fmt::format("experiment must be in 1..{}, got {}", kExperimentCount,
                                  experiment));
  if (image_size < 8) throw ConfigError("image size must be at least 8");
  if (experiment == 5 && fusion.empty()) throw ConfigError("no fusion methods selected");
  ppo().validate();
}

PPOConfig ExperimentConfig::ppo() const {
  if (ppo_preset) return PPOConfig::from_preset(*ppo_preset);
  return experiment == 4 ? PPOConfig::image_preset() : PPOConfig::text_preset();
}

nlohmann::ordered_json ExperimentConfig::canonical_json() const {
  std::string lexicons;
  for (auto role : {TextRole::expander, TextRole::architecture, TextRole::portrait,
                    TextRole::landscape})
    lexicons += read_file(data_dir / "lexicons" / (std::string(to_string(role)) + ".tsv"));
  std::vector<std::string> names;
  for (const auto& f : fusion) names.push_back(f.name);
  const auto p = ppo();
  return {{"experiment", experiment},
          {"seed", seed},
          {"suite_digest", content_digest(read_file(suite))},
          {"lexicon_digest", content_digest(lexicons)},
          {"image_size", image_size},
          {"fusion", names},
          {"ppo",
           {{"clip_epsilon", p.clip_epsilon},
            {"gamma", p.gamma},
            {"learning_rate", p.learning_rate},
            {"gae_lambda", p.gae_lambda ? nlohmann::json(*p.gae_lambda) : nlohmann::json()},
            {"batch_size", p.batch_size},
            {"epochs_per_batch", p.epochs_per_batch},
            {"reward_preset", std::string(to_string(p.reward_preset))}}},
          {"training_iterations", training_iterations},
          {"lora", {{"rank", lora.rank}, {"alpha", lora.alpha}, {"dropout", lora.dropout}}}};
}

std::string ExperimentConfig::digest() const { return content_digest(canonical_json().dump()); }

std::string content_digest(std::string_view bytes) {
  return fmt::format("{:016x}", fnv1a64(bytes));
}

// ------------------------------------------------------------------ records

const std::vector<std::string>& experiment_metrics(int experiment) {
  static const std::vector<std::string> text = {"bleu",      "rouge1_f1", "word_count",
                                                "coherence", "diversity", "text_reward"};
  static const std::vector<std::string> image = {"quality",      "similarity",
                                                 "overall",      "image_reward",
                                                 "consistency_score", "concept_coverage"};
  static const std::vector<std::string> fusion = {"quality", "similarity", "overall"};
  static const std::vector<std::string> integration = {
      "consistency_score", "contrastive_loss", "cos_sim",           "obj_valid",
      "clip_similarity",   "concept_coverage", "semantic_alignment"};
  switch (experiment) {
    case 1:
    case 2: return text;
    case 3:
    case 4: return image;
    case 5: return fusion;
    case 6: return integration;
  }
  throw InvalidArgument(fmt::format("no metric schema for experiment {}", experiment));
}

const std::vector<std::string>& metric_registry() {
  static const std::vector<std::string> all = [] {
    std::set<std::string> s;
    for (int e = 1; e <= kExperimentCount; ++e)
      for (const auto& m : experiment_metrics(e)) s.insert(m);
    return std::vector<std::string>(s.begin(), s.end());
  }();
  return all;
}

void RunRecord::set(const std::string& metric, double value) {
  const auto& reg = metric_registry();
  if (std::find(reg.begin(), reg.end(), metric) == reg.end())
    throw InvalidArgument("metric '" + metric + "' is not in the registry");
  metrics[metric] = value;
}

nlohmann::ordered_json to_json(const RunRecord& r, bool include_timing) {
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = v;
  nlohmann::ordered_json j = {{"schema_version", kRecordSchemaVersion},
                              {"experiment", r.experiment},
                              {"scenario", r.scenario},
                              {"condition", r.condition},
                              {"metrics", metrics},
                              {"seed", r.seed},
                              {"config_digest", r.config_digest}};
  if (include_timing) j["elapsed_seconds"] = r.elapsed_seconds;
  if (r.error) j["error"] = *r.error;
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kRecordSchemaVersion)
      throw IoError("unsupported record schema_version");
    RunRecord r;
    r.experiment = j.at("experiment").get<int>();
    r.scenario = j.at("scenario").get<std::string>();
    r.condition = j.at("condition").get<std::string>();
    for (const auto& [k, v] : j.at("metrics").items()) r.set(k, v.get<double>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    if (j.contains("elapsed_seconds")) r.elapsed_seconds = j["elapsed_seconds"].get<double>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed run record: ") + e.what());
  }
}

std::vector<std::string> experiment_conditions(const ExperimentConfig& config) {
  switch (config.experiment) {
    case 1:
    case 3: return {"single_agent", "multi_agent"};
    case 2:
    case 4: return {"before_rl", "after_rl"};
    case 5: {
      std::vector<std::string> names;
      for (const auto& f : config.fusion) names.push_back(f.name);
      return names;
    }
    case 6: {
      std::vector<std::string> names;
      for (auto d : kAllDirections) names.emplace_back(to_string(d));
      return names;
    }
  }
  throw ConfigError(fmt::format("experiment must be in 1..{}", kExperimentCount));
}

// ------------------------------------------------------------------ summary

double relative_change(double before, double after) {
  if (before == 0.0) return std::nan("");
  return 100.0 * (after - before) / before;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

std::string format_percent(double change) {
  if (std::isnan(change)) return "n/a";
  return fmt::format("{:+.1f}%", change);
}

SummaryTable aggregate(std::span<const RunRecord> records,
                       std::span<const std::string> condition_order) {
  if (records.empty()) throw InvalidArgument("aggregate: no records");
  SummaryTable t;
  t.experiment = records.front().experiment;
  for (const auto& r : records)
    if (r.experiment != t.experiment) throw InvalidArgument("aggregate: mixed experiment ids");

  if (!condition_order.empty()) {
    t.conditions.assign(condition_order.begin(), condition_order.end());
  } else {
    for (const auto& r : records)
      if (std::find(t.conditions.begin(), t.conditions.end(), r.condition) == t.conditions.end())
        t.conditions.push_back(r.condition);
  }
  std::set<std::string> scenarios;
  for (const auto& r : records) scenarios.insert(r.scenario);
  t.scenario_count = scenarios.size();

  std::vector<std::string> metrics;
  try {
    metrics = experiment_metrics(t.experiment);
  } catch (const InvalidArgument&) {
    std::set<std::string> seen;
    for (const auto& r : records)
      for (const auto& [k, v] : r.metrics) seen.insert(k);
    metrics.assign(seen.begin(), seen.end());
  }
  for (const auto& m : metrics) {
    SummaryRow row;
    row.metric = m;
    bool any = false;
    for (const auto& c : t.conditions) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : records) {
        if (r.condition != c || r.error) continue;
        if (auto it = r.metrics.find(m); it != r.metrics.end()) {
          sum += it->second;
          ++n;
        }
      }
      any = any || n > 0;
      row.means.push_back(n ? sum / static_cast<double>(n) : std::nan(""));
    }
    if (!any) continue;
    if (row.means.size() == 2) row.change = relative_change(row.means[0], row.means[1]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string summary_csv(const SummaryTable& t) {
  std::string out = "Metric";
  for (const auto& c : t.conditions) out += "," + c;
  out += ",Change\n";
  for (const auto& r : t.rows) {
    out += r.metric;
    for (double m : r.means) out += fmt::format(",{}", m);
    out += r.change ? fmt::format(",{}", *r.change) : ",";
    out += '\n';
  }
  return out;
}

SummaryTable parse_summary_csv(std::string_view content, int experiment) {
  SummaryTable t;
  t.experiment = experiment;
  auto lines = split(content, '\n');
  if (lines.empty() || lines.front().rfind("Metric,", 0) != 0)
    throw IoError("summary csv: missing header");
  auto header = split(lines.front(), ',');
  if (header.size() < 3 || header.back() != "Change") throw IoError("summary csv: bad header");
  t.conditions.assign(header.begin() + 1, header.end() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) throw IoError("summary csv: ragged row");
    SummaryRow row;
    row.metric = cells[0];
    for (std::size_t k = 1; k + 1 < cells.size(); ++k) row.means.push_back(std::stod(cells[k]));
    if (!cells.back().empty()) row.change = std::stod(cells.back());
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::string_view experiment_title(int experiment) {
  switch (experiment) {
    case 1: return "Text generation: single agent vs multi-agent";
    case 2: return "Text agents before and after PPO training";
    case 3: return "Image generation: single agent vs fused multi-agent";
    case 4: return "Image agents before and after PPO training";
    case 5: return "Fusion method benchmark";
    case 6: return "Multimodal integration directions";
  }
  return "Experiment";
}

int display_decimals(const std::string& metric) { return metric == "word_count" ? 1 : 3; }

std::string cell(double v, const std::string& metric) {
  if (std::isnan(v)) return "n/a";
  return fmt::format("{:.{}f}", v, display_decimals(metric));
}

}  // namespace

std::string summary_markdown(const SummaryTable& t) {
  std::string out = fmt::format("## Experiment {}: {}\n\nScenarios: {}\n\n", t.experiment,
                                experiment_title(t.experiment), t.scenario_count);
  const bool paired = t.conditions.size() == 2;
  out += "| Metric |";
  for (const auto& c : t.conditions) out += " " + c + " |";
  out += paired ? " Change |\n|---|" : "\n|---|";
  for (std::size_t i = 0; i < t.conditions.size() + (paired ? 1 : 0); ++i) out += "---|";
  out += '\n';
  for (const auto& r : t.rows) {
    out += "| " + r.metric + " |";
    for (double m : r.means) out += " " + cell(m, r.metric) + " |";
    // The displayed change is taken from the displayed cells, so a reader can
    // recompute it from the table alone.
    if (paired) {
      auto shown = [&](double v) { return std::isnan(v) ? v : std::stod(cell(v, r.metric)); };
      out += " " + format_percent(relative_change(shown(r.means[0]), shown(r.means[1]))) + " |";
    }
    out += '\n';
  }
  if (t.experiment == 1)
    out +=
        "\nWord-count reference figures disagree between the published summary (8.4 -> 144, "
        "+1614%) and the per-scenario table (9.0 -> 121.6, +1251%); fixtures use the "
        "per-scenario table.\n";
  return out;
}

std::string scores_csv(int experiment, std::span<const RunRecord> records) {
  const auto& metrics = experiment_metrics(experiment);
  std::string out = "Experiment,Scenario,Condition";
  for (const auto& m : metrics) out += "," + m;
  out += ",Error\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{}", r.experiment, r.scenario, r.condition);
    for (const auto& m : metrics) {
      auto it = r.metrics.find(m);
      out += it == r.metrics.end() ? "," : fmt::format(",{}", it->second);
    }
    std::string err = r.error.value_or("");
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += "," + err + "\n";
  }
  return out;
}

}  // namespace mats
