// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here and printed alongside each result.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "mats/agents/agents.hpp"
#include "mats/consistency.hpp"
#include "mats/fusion.hpp"
#include "mats/harness/harness.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/text_metrics.hpp"
#include "oracles/ngram_oracle.hpp"
#include "support/fusion_properties.hpp"
#include "support/ppo_checks.hpp"

namespace fs = std::filesystem;
using namespace mats;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome fusion_overall_arithmetic() {
  const double a = overall_score(0.417, 0.625);
  const double b = overall_score(0.250, 0.625);
  const bool pass = round3(a) == 0.521 && round3(b) == 0.438;
  return {pass, fmt::format("overall(0.417,0.625)={:.4f} overall(0.250,0.625)={:.4f}; exact at 3 decimals", a, b)};
}

Outcome table_arithmetic() {
  struct Change {
    double before, after, expect;
  };
  const Change changes[] = {
      {0.769, 0.233, -69.7}, {9.0, 121.6, 1251.1}, {0.803, 0.459, -42.9}, {0.808, 0.593, -26.6}};
  bool pass = true;
  std::string detail;
  for (const auto& c : changes) {
    const double got = relative_change(c.before, c.after);
    pass = pass && std::abs(got - c.expect) <= 0.1;
    detail += fmt::format("{}->{}: {:.2f}% (want {:.1f}%); ", c.before, c.after, got, c.expect);
  }
  const double before[] = {0.800, 0.824, 0.800};
  const double after[] = {0.600, 0.609, 0.571};
  std::vector<RunRecord> records;
  for (int i = 0; i < 3; ++i) {
    RunRecord b, a;
    b.experiment = a.experiment = 2;
    b.scenario = a.scenario = "row" + std::to_string(i);
    b.condition = "before_rl";
    a.condition = "after_rl";
    b.set("rouge1_f1", before[i]);
    a.set("rouge1_f1", after[i]);
    records.push_back(b);
    records.push_back(a);
  }
  const auto t = aggregate(records);
  const double m0 = t.rows.at(0).means.at(0), m1 = t.rows.at(0).means.at(1);
  pass = pass && std::abs(m0 - 0.808) <= 0.001 && std::abs(m1 - 0.593) <= 0.001;
  detail += fmt::format("means {:.4f}/{:.4f} (want 0.808/0.593); tol 0.1pp / 0.001", m0, m1);
  return {pass, detail};
}

Outcome ppo_correctness() {
  constexpr int cases = 120;
  double worst = 0.0;
  std::size_t max_params = 0;
  for (int s = 0; s < cases; ++s) {
    const auto g = ppo_checks::make_grad_case(derive_seed(7001, {static_cast<std::uint64_t>(s)}));
    max_params = std::max(max_params, g.policy.parameter_count());
    worst = std::max(worst, ppo_checks::grad_case_error(g));
  }
  const double id1 = clipped_objective(-0.7, -0.7, 1.3, 0.2);
  const double id2 = clipped_objective(std::log(2.0), 0.0, 1.0, 0.2);
  const bool identities = id1 == 1.3 && std::abs(id2 - 1.2) <= 1e-15;
  const bool pass = worst <= 1e-4 && max_params <= 200 && identities;
  return {pass, fmt::format("{} cases, max params {}, worst rel err {:.2e} (tol 1e-4); rho=1 -> {}, "
                            "rho=2 -> {:.15f}",
                            cases, max_params, worst, id1, id2)};
}

Outcome ppo_convergence() {
  std::size_t ok = 0;
  std::string its;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto n = ppo_checks::bandit_iterations_to(0.9, seed, 500);
    ok += n <= 500 ? 1 : 0;
    its += (n <= 500 ? std::to_string(n) : std::string(">500")) + (seed < 9 ? "," : "");
  }
  return {ok >= 9, fmt::format("{}/10 seeds reach p(best) >= 0.9 within 500 iterations "
                               "(iterations: {}); need >= 9", ok, its)};
}

Outcome metric_oracle() {
  SplitMix64 rng(99);
  auto random_tokens = [&](std::size_t vocab) {
    Tokens t(1 + rng.below(12));
    for (auto& w : t) w = "w" + std::to_string(rng.below(vocab));
    return t;
  };
  std::size_t mismatches = 0;
  constexpr int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const std::size_t vocab = 2 + rng.below(8);
    const auto c = random_tokens(vocab), r = random_tokens(vocab);
    if (bleu(c, r) != oracle::bleu(c, r)) ++mismatches;
    if (rouge1_f1(c, r) != oracle::rouge1_f1(c, r)) ++mismatches;
  }
  const double fixture = rouge1_f1(tokenize("the cat sat"), tokenize("the cat ran"));
  const bool pass = mismatches == 0 && fixture == 2.0 / 3.0;
  return {pass, fmt::format("{} pairs, {} mismatches (exact equality); rouge1_f1 fixture {:.17g}",
                            pairs, mismatches, fixture)};
}

Outcome consistency_algebra() {
  SplitMix64 rng(5);
  bool single_zero = true, scale_exact = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    Sequence t(n, std::vector<double>(32)), v(n, std::vector<double>(32));
    for (auto& row : t)
      for (double& x : row) x = rng.normal();
    for (auto& row : v)
      for (double& x : row) x = rng.normal();
    for (auto d : kAllDirections) {
      if (n == 1) single_zero = single_zero && contrastive_loss(t, v, 0.07, d)[0] == 0.0;
      const auto base = contrastive_loss(t, v, 0.07, d);
      // Scales that are powers of two keep the scaled inputs exact, so the
      // loss must be bit-identical.
      for (double c : {0.5, 8.0, 0x1p20}) {
        auto ts = t, vs = v;
        for (auto& row : ts)
          for (double& x : row) x *= c;
        for (auto& row : vs)
          for (double& x : row) x *= 1.0 / (2.0 * c);
        scale_exact = scale_exact && contrastive_loss(ts, vs, 0.07, d) == base;
      }
    }
  }
  const ConsistencyWeights w;
  const double perfect = consistency_score(0.0, 1.0, 1.0, w);
  const double mid = consistency_score(0.3, 0.6, 1.0 / 3.0, w);
  const double jac = object_validation({"a", "b"}, {"b", "c"});
  const bool pass = single_zero && scale_exact && std::abs(perfect - 1.0) <= 1e-12 &&
                    std::abs(mid - 0.56) <= 1e-12 && jac == 1.0 / 3.0;
  return {pass, fmt::format("n=1 loss zero: {}; scale invariance exact: {}; C(perfect)={:.15f} "
                            "C(0.3,0.6,1/3)={:.15f}; Jaccard={:.15f}",
                            single_zero, scale_exact, perfect, mid, jac)};
}

Outcome fusion_invariants() {
  fusion_props::Violations v;
  constexpr std::uint64_t triples = 1000;
  for (std::uint64_t s = 0; s < triples; ++s)
    fusion_props::check_triple(fusion_props::random_triple(derive_seed(424242, {s})), s, v);
  return {v.total() == 0,
          fmt::format("{} triples x 6 methods (64x64x3): range {} envelope {} simplex {} "
                      "negative {} idempotence {} permutation {} violations",
                      triples, v.range, v.envelope, v.simplex, v.negative_weight, v.idempotence,
                      v.permutation)};
}

Outcome multi_agent_enrichment() {
  const auto roster = load_agents(MATS_TEST_DATA_DIR, 42);
  const auto suite = load_suite(MATS_TEST_SUITE);
  bool pass = !suite.empty();
  std::string detail;
  for (const auto& s : suite) {
    const auto prompt = tokenize(s.prompt);
    const auto out = multi_agent_enhance(prompt, roster.text, roster.routing);
    const bool prefix = out.tokens.size() >= prompt.size() &&
                        std::equal(prompt.begin(), prompt.end(), out.tokens.begin());
    const bool enough = out.tokens.size() >= 10 * prompt.size();
    pass = pass && prefix && enough && prompt.size() == 9;
    detail += fmt::format("{} {}->{}{}; ", s.name, prompt.size(), out.tokens.size(),
                          prefix ? "" : " (prefix lost)");
  }
  return {pass, detail + "need >= 10x and exact prefix"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MATS_CLI_PATH + "\" " + args + " > /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end_determinism() {
  const auto base = fs::temp_directory_path() / "mats_acceptance_runs";
  fs::remove_all(base);
  bool pass = true;
  std::string detail;
  for (int e = 1; e <= kExperimentCount; ++e) {
    std::string digests[2];
    std::string files[2];
    bool ran = true;
    for (int rep = 0; rep < 2; ++rep) {
      const auto out = base / fmt::format("exp{}_{}", e, rep);
      const int code = run_cli(fmt::format(
          "run --experiment {} --seed 42 --scenarios \"{}\" --data-dir \"{}\" --image-size 64 --out \"{}\"",
          e, MATS_TEST_SUITE, MATS_TEST_DATA_DIR, out.string()));
      if (code != 0) {
        ran = false;
        break;
      }
      for (const char* f : {"scores.csv", "summary.csv", "summary.md"}) files[rep] += read_file(out / f);
      digests[rep] =
          nlohmann::json::parse(read_file(out / "manifest.json"))["score_digest"].get<std::string>();
    }
    const bool same = ran && !files[0].empty() && files[0] == files[1] && digests[0] == digests[1];
    pass = pass && same;
    detail += fmt::format("exp{} {}; ", e, !ran ? "run failed" : same ? "identical" : "DIFFERS");
  }
  fs::remove_all(base);
  return {pass, detail + "compared scores.csv, summary.csv, summary.md and score digest"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "fusion overall-score arithmetic", 0.001, fusion_overall_arithmetic},
      {2, "table-arithmetic fixtures", 0.001, table_arithmetic},
      {3, "PPO gradient correctness", 30, ppo_correctness},
      {4, "PPO bandit convergence", 60, ppo_convergence},
      {5, "metric oracle equivalence", 30, metric_oracle},
      {6, "consistency algebra", 1, consistency_algebra},
      {7, "fusion invariants", 60, fusion_invariants},
      {8, "multi-agent enrichment", 5, multi_agent_enrichment},
      {9, "end-to-end determinism", 600, end_to_end_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    fmt::print("{} [{}] {}: {} ({:.3f}s, budget {}s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
               o.detail, secs, c.budget_seconds);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
             criteria.size());
  return failures == 0 ? 0 : 1;
}
