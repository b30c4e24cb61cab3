#include <cmath>
#include <fstream>
#include <sstream>

#include "mats/error.hpp"
#include "mats/harness/harness.hpp"

namespace mats {

namespace {

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Per-method means over scenarios in the fixed fusion schema. Methods without
// records are left out.
std::string fusion_summary_csv(const ExperimentConfig& config, std::span<const RunRecord> records) {
  std::vector<FusionReport> reports;
  for (const auto& spec : config.fusion) {
    FusionReport rep;
    rep.method = spec.name;
    std::size_t n = 0, failed = 0;
    for (const auto& r : records) {
      if (r.condition != spec.name) continue;
      if (r.error) {
        ++failed;
        rep.error = r.error;
        continue;
      }
      rep.quality += r.metrics.at("quality");
      rep.similarity += r.metrics.at("similarity");
      rep.overall += r.metrics.at("overall");
      rep.elapsed_seconds += r.elapsed_seconds;
      ++n;
    }
    if (n > 0) {
      rep.error.reset();
      rep.quality /= static_cast<double>(n);
      rep.similarity /= static_cast<double>(n);
      rep.overall /= static_cast<double>(n);
      rep.elapsed_seconds /= static_cast<double>(n);
    } else if (failed == 0) {
      continue;  // method absent from the records
    }
    reports.push_back(std::move(rep));
  }
  return fusion_reports_csv(reports);
}

}  // namespace

nlohmann::ordered_json to_json(const Manifest& m) {
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& f : m.files)
    files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"digest", f.digest}});
  nlohmann::ordered_json j = {{"schema_version", kRecordSchemaVersion},
                              {"experiment", m.experiment},
                              {"seed", m.seed},
                              {"config_digest", m.config_digest},
                              {"score_digest", m.score_digest},
                              {"files", files}};
  if (m.error) j["error"] = *m.error;
  return j;
}

Manifest emit(const ExperimentConfig& config, std::span<const RunRecord> records,
              const std::filesystem::path& out_dir, const TrainingLog* training_log) {
  Manifest manifest;
  manifest.experiment = config.experiment;
  manifest.seed = config.seed;
  manifest.config_digest = config.digest();

  std::string scores;
  for (const auto& r : records) scores += to_json(r, false).dump() + "\n";
  manifest.score_digest = content_digest(scores);

  auto put = [&](const std::string& name, const std::string& bytes) {
    write_file(out_dir / name, bytes);
    const auto back = read_file(out_dir / name);
    if (back != bytes) throw IoError("read-back mismatch for " + name);
    manifest.files.push_back({name, bytes.size(), content_digest(bytes)});
  };

  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    put("scores.csv", scores_csv(config.experiment, records));
    SummaryTable table;
    table.experiment = config.experiment;
    table.conditions = experiment_conditions(config);
    if (!records.empty()) table = aggregate(records, experiment_conditions(config));
    put("summary.csv", summary_csv(table));
    put("summary.md", summary_markdown(table));
    std::string jsonl;
    for (const auto& r : records) jsonl += to_json(r).dump() + "\n";
    put("records.jsonl", jsonl);
    if (config.experiment == 5) put("exp5_fusion.csv", fusion_summary_csv(config, records));
    if (training_log) put("training.jsonl", training_log->to_json_lines());
  } catch (const std::exception& e) {
    manifest.error = e.what();
    try {
      write_file(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
    } catch (const std::exception&) {
    }
    throw IoError(std::string("emit failed: ") + e.what());
  }
  write_file(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }
  return out;
}

SummaryTable load_summary(const std::filesystem::path& dir) {
  const auto records = load_records(dir / "records.jsonl");
  if (records.empty()) throw IoError("no records in " + dir.string());
  return aggregate(records);
}

}  // namespace mats
