#pragma once

// Quantities pinned as golden values. The generator (tests/support/make_golden.cpp)
// and the tests both compute them through these functions.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mats/agents/agents.hpp"
#include "mats/consistency.hpp"
#include "mats/fusion.hpp"
#include "mats/embeddings/embeddings.hpp"
#include "mats/embeddings/tokenize.hpp"
#include "mats/harness/harness.hpp"
#include "mats/numerics/rng.hpp"

namespace golden {

// Values quantized to 1e-9 before hashing so the digest tolerates last-bit noise.
inline std::string digest(std::span<const double> values) {
  std::string s;
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.9f,", v);
    s += buf;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(mats::fnv1a64(s)));
  return out;
}

inline std::vector<double> seeded_latent(std::uint64_t seed) {
  mats::SplitMix64 rng(seed);
  std::vector<double> z(mats::kLatentDim);
  for (double& v : z) v = rng.normal();
  return z;
}

inline mats::AgentRoster roster() { return mats::load_agents(MATS_TEST_DATA_DIR, 42); }

// Gothic cathedral prompt rendered by the architecture agent and scored
// text-to-image.
inline mats::ConsistencyReport cathedral_report() {
  using namespace mats;
  const auto r = roster();
  const std::string prompt = "a gothic cathedral with tall spires and stained glass windows";
  const auto features = embed_text(prompt);
  const auto tags = TagSet{"cathedral", "spire", "glass", "window"};
  const auto img = generate_image(r.image[0], route_features(r.image[0], features.values), tags);
  const std::vector<std::string> concepts{"cathedral", "spire", "glass"};
  return evaluate_integration(prompt, img, IntegrationDirection::text_to_image, concepts,
                              ConsistencyConfig::with_seed(42));
}

inline nlohmann::ordered_json compute() {
  using namespace mats;
  nlohmann::ordered_json j;
  j["text_cosine_medieval"] = cosine_similarity(embed_text("medieval castle").values,
                                                embed_text("medieval castle on a hill").values);
  const auto img = render_domain(Domain::landscape, seeded_latent(7), RendererConfig{});
  j["image_feature"] = digest(extract_image_features(img).values);
  j["projection"] = digest(project_to_shared(embed_text("medieval castle").values, Modality::text,
                                             make_projection(5))
                               .values);
  const auto r = roster();
  const auto features = embed_text("a medieval castle on a hill at golden sunset");
  j["route_latent"] = digest(route_features(r.image[0], features.values).values);
  for (auto d : kDomains)
    j["base_pattern"][std::string(to_string(d))] =
        digest(render_domain(d, std::vector<double>(kLatentDim, 0.0), RendererConfig{}).data());
  const auto land = generate_image(r.image[2], AgentLatent{seeded_latent(9), r.image[2].id()},
                                   TagSet{"mountain", "lake", "castle"});
  j["landscape_image"] = digest(land.pixels.data());
  j["landscape_tags"] = land.concept_tags;
  j["landscape_quality"] = image_quality_score(land);
  j["cathedral_report"] = to_json(cathedral_report());
  j["expander_medieval"] = join(enhance_text(r.text.expander, tokenize("medieval castle"), 40));
  for (const auto& s : load_suite(MATS_TEST_SUITE))
    j["multi_agent"][s.name] =
        join(multi_agent_enhance(tokenize(s.prompt), r.text, r.routing).tokens);
  return j;
}

inline nlohmann::json load() {
  std::ifstream in(std::string(MATS_GOLDEN_DIR) + "/golden.json");
  return nlohmann::json::parse(in);
}

}  // namespace golden
