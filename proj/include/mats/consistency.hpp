#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mats/agents/agents.hpp"
#include "mats/embeddings/embeddings.hpp"
#include "mats/numerics/attention.hpp"

namespace mats {

struct ConsistencyWeights {
  double contrast = 0.4;
  double cosine = 0.3;
  double object = 0.3;

  void validate() const;
};

using KeywordSet = std::set<std::string>;

enum class IntegrationDirection { text_to_image, image_to_text, bidirectional };
inline constexpr IntegrationDirection kAllDirections[] = {IntegrationDirection::text_to_image,
                                                          IntegrationDirection::image_to_text,
                                                          IntegrationDirection::bidirectional};

std::string_view to_string(IntegrationDirection d);
IntegrationDirection parse_direction(std::string_view name);

// Per-pair InfoNCE losses over a batch of matched (text_i, image_i) pairs.
// Rows are normalized first; S_ij = t_i . v_j / tau and
//   text_to_image: loss_i = logsumexp_j S_ij - S_ii
//   image_to_text: loss_i = logsumexp_j S_ji - S_ii
//   bidirectional: mean of the two.
std::vector<double> contrastive_loss(const Sequence& text, const Sequence& image,
                                     double temperature, IntegrationDirection anchor);
std::vector<double> contrastive_loss(std::span<const SharedEmbedding> text,
                                     std::span<const SharedEmbedding> image, double temperature,
                                     IntegrationDirection anchor);

// Normalized tokens minus the built-in English stopword list.
KeywordSet keyword_extract(const Tokens& tokens);
bool is_stopword(std::string_view token);

// The image's concept tags, normalized like text tokens.
KeywordSet object_detect(const GeneratedImage& image);

// Jaccard index; two empty sets score 1.
double object_validation(const KeywordSet& text_keywords, const KeywordSet& image_keywords);

// w1 clamp01(1 - L) + w2 clamp01(cos) + w3 obj.
double consistency_score(double contrastive_loss, double cos_sim, double obj_valid,
                         const ConsistencyWeights& weights = {});

struct ConsistencyReport {
  double score = 0.0;
  double contrastive_loss = 0.0;
  double cos_sim = 0.0;
  double obj_valid = 0.0;
  double clip_similarity = 0.0;
  double concept_coverage = 0.0;
  double semantic_alignment = 0.0;
  IntegrationDirection direction = IntegrationDirection::text_to_image;
  ConsistencyWeights weights;
};

nlohmann::json to_json(const ConsistencyReport& report);

struct ConsistencyConfig {
  ConsistencyWeights weights;
  double temperature = 0.07;
  std::size_t distractors = 7;
  std::uint64_t seed = 0;
  std::shared_ptr<const ProjectionParams> projection;

  // Builds the shared-space projection from `seed`.
  static ConsistencyConfig with_seed(std::uint64_t seed);
  const ProjectionParams& shared_projection() const;
};

// Everything the composite score needs, already embedded.
struct AlignmentInputs {
  SharedEmbedding text;
  SharedEmbedding image;
  std::vector<SharedEmbedding> distractor_text;
  std::vector<SharedEmbedding> distractor_image;
  KeywordSet text_keywords;
  KeywordSet image_keywords;
  std::vector<std::string> concepts;
  double semantic_alignment = 0.0;
};

ConsistencyReport assess_alignment(const AlignmentInputs& inputs, IntegrationDirection direction,
                                   const ConsistencyConfig& config);

// Weak raw-space signal: text features mean-pooled 768 -> 256, image features
// 2048 -> 256, a fixed random 256 x 256 map applied to the text side, then
// clamp01(cosine).
double semantic_alignment(const TextEmbedding& text, const ImageFeature& image,
                          std::uint64_t seed);

// Embeds the pair, adds config.distractors seeded distractor pairs and scores.
ConsistencyReport evaluate_integration(std::string_view text, const GeneratedImage& image,
                                       IntegrationDirection direction,
                                       std::span<const std::string> concepts,
                                       const ConsistencyConfig& config);

// (cos(hashed keywords of text, hashed image tags) + 1) / 2; 0 if either side
// has no keywords. Depends on the image only through its tags.
double text_tag_similarity(std::string_view text, const GeneratedImage& image);

}  // namespace mats
