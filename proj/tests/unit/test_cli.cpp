#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mats/harness/harness.hpp"
#include "mats/harness/image_io.hpp"
#include "mats/numerics/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "mats_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliResult run_cli(const std::string& args) {
  const auto out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + MATS_CLI_PATH + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string suite_args() {
  return std::string(" --scenarios \"") + MATS_TEST_SUITE + "\" --data-dir \"" + MATS_TEST_DATA_DIR +
         "\"";
}

fs::path write_test_image(const std::string& name, std::uint64_t seed) {
  mats::Tensor t({16, 16, 3});
  mats::SplitMix64 rng(seed);
  for (double& v : t.data()) v = static_cast<double>(rng.below(256)) / 255.0;
  const auto p = work_dir() / name;
  mats::write_ppm(p, t);
  return p;
}

}  // namespace

TEST_CASE("run writes a manifest and report rebuilds the table") {
  const auto out = work_dir() / "e1";
  const auto r = run_cli("run --experiment 1 --seed 42" + suite_args() + " --out \"" + out.string() + "\"");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(out / "manifest.json"));
  const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  CHECK(manifest["seed"] == 42);
  CHECK(manifest["experiment"] == 1);
  CHECK(r.out.find(manifest["score_digest"].get<std::string>()) != std::string::npos);

  const auto md = run_cli("report --in \"" + out.string() + "\" --format md");
  CHECK(md.code == 0);
  CHECK(md.out == read_file(out / "summary.md"));
  CHECK(md.out.find("| Metric | single_agent | multi_agent | Change |") != std::string::npos);
  const auto csv = run_cli("report --in \"" + out.string() + "\" --format csv");
  CHECK(csv.code == 0);
  CHECK(csv.out == read_file(out / "summary.csv"));
}

TEST_CASE("output directory defaults to MATS_OUT_DIR") {
  const auto base = work_dir() / "envout";
  ::setenv("MATS_OUT_DIR", base.string().c_str(), 1);
  const auto r = run_cli("run --experiment 1" + suite_args());
  ::unsetenv("MATS_OUT_DIR");
  CHECK(r.code == 0);
  CHECK(fs::exists(base / "exp1" / "manifest.json"));
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("run --experiment 9 --out x").code == 1);
  CHECK(run_cli("run --experiment 0 --out x").code == 1);
  const auto unknown = run_cli("run --experiment 1 --bogus");
  CHECK(unknown.code == 1);
  CHECK_FALSE(unknown.err.empty());
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("run --experiment 5 --fusion median" + suite_args() + " --out \"" +
                (work_dir() / "bad").string() + "\"").code == 1);
  CHECK(run_cli("run --experiment 1 --scenarios /nonexistent.txt --out \"" +
                (work_dir() / "bad2").string() + "\"").code == 1);
  CHECK(run_cli("report --in x --format pdf").code == 1);
}

TEST_CASE("runtime failures exit 2") {
  CHECK(run_cli("report --in \"" + (work_dir() / "missing").string() + "\"").code == 2);
  CHECK(run_cli("fuse --inputs /nonexistent/a.ppm /nonexistent/b.ppm --method simple_average").code == 2);
}

TEST_CASE("help on every subcommand") {
  CHECK(run_cli("--help").code == 0);
  for (const char* sub : {"run", "report", "fuse", "consistency", "train"}) {
    const auto r = run_cli(std::string(sub) + " --help");
    CHECK_MESSAGE(r.code == 0, sub);
    CHECK(r.out.find("--") != std::string::npos);
  }
}

TEST_CASE("fuse and consistency subcommands") {
  const auto a = write_test_image("a.ppm", 1), b = write_test_image("b.ppm", 2);
  const auto fused = work_dir() / "fused.ppm";
  const auto r = run_cli("fuse --inputs \"" + a.string() + "\" \"" + b.string() +
                         "\" --method transformer --tags castle,tower --out \"" + fused.string() + "\"");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto img = mats::read_ppm(fused);
  CHECK(img.shape() == std::vector<std::size_t>{16, 16, 3});
  CHECK(run_cli("fuse --inputs \"" + a.string() + "\" --method simple_average").code == 1);

  const auto c = run_cli("consistency --text \"a stone castle with a tower\" --image \"" +
                         fused.string() + "\" --tags castle,tower --concepts castle --direction text_to_image");
  REQUIRE_MESSAGE(c.code == 0, c.err);
  const auto j = nlohmann::json::parse(c.out);
  CHECK(j["direction"] == "text_to_image");
  CHECK(j["obj_valid"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(j["concept_coverage"] == 1.0);
  CHECK(run_cli("consistency --text x --image \"" + fused.string() + "\" --direction up").code == 1);
}

TEST_CASE("train subcommand emits a JSON-lines log") {
  const auto log = work_dir() / "train.jsonl";
  const auto r = run_cli("train --agents bandit --mode simultaneous --iterations 5 --out \"" +
                         log.string() + "\"");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream in(read_file(log));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("mean_reward"));
    ++n;
  }
  CHECK(n == 5);
  const auto again = run_cli("train --agents bandit --mode simultaneous --iterations 5");
  CHECK(again.out == read_file(log));
  CHECK(run_cli("train --mode async").code == 1);
}
