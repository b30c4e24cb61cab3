#include "mats/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/numerics/softmax.hpp"

namespace mats {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

constexpr std::string_view kStopwords[] = {
    "a",     "about", "above", "after", "again", "against", "all",   "am",    "an",    "and",
    "any",   "are",   "as",    "at",    "be",    "because", "been",  "before", "being", "below",
    "between", "both", "but",  "by",    "can",   "could",   "did",   "do",    "does",  "doing",
    "down",  "during", "each", "few",   "for",   "from",    "further", "had", "has",   "have",
    "having", "he",   "her",   "here",  "hers",  "him",     "his",   "how",   "i",     "if",
    "in",    "into",  "is",    "it",    "its",   "itself",  "just",  "me",    "more",  "most",
    "my",    "no",    "nor",   "not",   "now",   "of",      "off",   "on",    "once",  "only",
    "or",    "other", "our",   "out",   "over",  "own",     "same",  "she",   "should", "so",
    "some",  "such",  "than",  "that",  "the",   "their",   "them",  "then",  "there", "these",
    "they",  "this",  "those", "through", "to",  "too",     "under", "until", "up",    "very",
    "was",   "we",    "were",  "what",  "when",  "where",   "which", "while", "who",   "whom",
    "why",   "will",  "with",  "you",   "your",  "yours"};

constexpr std::string_view kDistractorVocabulary[] = {
    "harbor", "lantern", "violin", "desert",  "engine",  "garden", "piano",  "glacier",
    "market", "bicycle", "orchid", "thunder", "library", "anchor", "falcon", "circuit",
    "canyon", "teapot",  "comet",  "meadow",  "saddle",  "mirror", "rocket", "velvet",
    "quarry", "banner",  "pepper", "island",  "compass", "marble", "tunnel", "feather"};

std::vector<double> pool(std::span<const double> v, std::size_t bins) {
  std::vector<double> out(bins, 0.0);
  const std::size_t per = v.size() / bins;
  for (std::size_t b = 0; b < bins; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += v[b * per + i];
    out[b] = s / static_cast<double>(per);
  }
  return out;
}

}  // namespace

void ConsistencyWeights::validate() const {
  if (!(contrast >= 0.0) || !(cosine >= 0.0) || !(object >= 0.0) ||
      std::abs(contrast + cosine + object - 1.0) > 1e-9)
    throw ConfigError("consistency weights must be nonnegative and sum to 1");
}

std::string_view to_string(IntegrationDirection d) {
  switch (d) {
    case IntegrationDirection::text_to_image: return "text_to_image";
    case IntegrationDirection::image_to_text: return "image_to_text";
    case IntegrationDirection::bidirectional: return "bidirectional";
  }
  return "?";
}

IntegrationDirection parse_direction(std::string_view name) {
  for (auto d : kAllDirections)
    if (to_string(d) == name) return d;
  throw ConfigError("unknown integration direction '" + std::string(name) + "'");
}

std::vector<double> contrastive_loss(const Sequence& text, const Sequence& image,
                                     double temperature, IntegrationDirection anchor) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("contrastive_loss: temperature must be positive");
  if (text.empty() || text.size() != image.size())
    throw InvalidArgument("contrastive_loss: batch sizes must match and be nonzero");
  const std::size_t n = text.size();
  Sequence t, v;
  for (const auto& x : text) t.push_back(normalized(x));
  for (const auto& x : image) v.push_back(normalized(x));
  std::vector<std::vector<double>> s(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i][j] = dot(t[i], v[j]) / temperature;

  auto row_loss = [&](std::size_t i) { return log_sum_exp(s[i]) - s[i][i]; };
  auto col_loss = [&](std::size_t i) {
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) col[j] = s[j][i];
    return log_sum_exp(col) - s[i][i];
  };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double l = 0.0;
    switch (anchor) {
      case IntegrationDirection::text_to_image: l = row_loss(i); break;
      case IntegrationDirection::image_to_text: l = col_loss(i); break;
      case IntegrationDirection::bidirectional: l = 0.5 * (row_loss(i) + col_loss(i)); break;
    }
    out[i] = std::max(0.0, l);
  }
  return out;
}

std::vector<double> contrastive_loss(std::span<const SharedEmbedding> text,
                                     std::span<const SharedEmbedding> image, double temperature,
                                     IntegrationDirection anchor) {
  Sequence t, v;
  for (const auto& e : text) t.push_back(e.values);
  for (const auto& e : image) v.push_back(e.values);
  return contrastive_loss(t, v, temperature, anchor);
}

bool is_stopword(std::string_view token) {
  return std::find(std::begin(kStopwords), std::end(kStopwords), token) != std::end(kStopwords);
}

KeywordSet keyword_extract(const Tokens& tokens) {
  KeywordSet out;
  for (const auto& t : tokens)
    if (!is_stopword(t)) out.insert(t);
  return out;
}

KeywordSet object_detect(const GeneratedImage& image) {
  KeywordSet out;
  for (const auto& tag : image.concept_tags)
    for (auto& t : tokenize(tag)) out.insert(std::move(t));
  return out;
}

double object_validation(const KeywordSet& a, const KeywordSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.contains(x) ? 1 : 0;
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double consistency_score(double contrastive_loss, double cos_sim, double obj_valid,
                         const ConsistencyWeights& weights) {
  weights.validate();
  return weights.contrast * clamp01(1.0 - contrastive_loss) + weights.cosine * clamp01(cos_sim) +
         weights.object * obj_valid;
}

nlohmann::json to_json(const ConsistencyReport& r) {
  return {{"score", r.score},
          {"contrastive_loss", r.contrastive_loss},
          {"cos_sim", r.cos_sim},
          {"obj_valid", r.obj_valid},
          {"clip_similarity", r.clip_similarity},
          {"concept_coverage", r.concept_coverage},
          {"semantic_alignment", r.semantic_alignment},
          {"direction", std::string(to_string(r.direction))}};
}

ConsistencyConfig ConsistencyConfig::with_seed(std::uint64_t seed) {
  ConsistencyConfig c;
  c.seed = seed;
  c.projection = std::make_shared<const ProjectionParams>(make_projection(derive_seed(seed, {31})));
  return c;
}

const ProjectionParams& ConsistencyConfig::shared_projection() const {
  if (!projection) throw ConfigError("consistency config has no projection; use with_seed()");
  return *projection;
}

ConsistencyReport assess_alignment(const AlignmentInputs& in, IntegrationDirection direction,
                                   const ConsistencyConfig& config) {
  config.weights.validate();
  if (in.distractor_text.size() != in.distractor_image.size())
    throw InvalidArgument("assess_alignment: distractor batch sizes differ");
  std::vector<SharedEmbedding> texts{in.text}, images{in.image};
  texts.insert(texts.end(), in.distractor_text.begin(), in.distractor_text.end());
  images.insert(images.end(), in.distractor_image.begin(), in.distractor_image.end());

  ConsistencyReport r;
  r.direction = direction;
  r.weights = config.weights;
  r.contrastive_loss = contrastive_loss(texts, images, config.temperature, direction)[0];
  r.cos_sim = cosine_similarity(in.text.values, in.image.values);
  r.obj_valid = object_validation(in.text_keywords, in.image_keywords);
  r.clip_similarity = clamp01((r.cos_sim + 1.0) / 2.0);
  if (in.concepts.empty()) {
    r.concept_coverage = 1.0;
  } else {
    std::size_t found = 0;
    for (const auto& c : in.concepts) found += in.image_keywords.contains(c) ? 1 : 0;
    r.concept_coverage = static_cast<double>(found) / static_cast<double>(in.concepts.size());
  }
  r.semantic_alignment = in.semantic_alignment;
  r.score = consistency_score(r.contrastive_loss, r.cos_sim, r.obj_valid, r.weights);
  return r;
}

double semantic_alignment(const TextEmbedding& text, const ImageFeature& image,
                          std::uint64_t seed) {
  constexpr std::size_t bins = 256;
  const auto t = pool(text.values, bins);
  const auto v = pool(image.values, bins);
  SplitMix64 rng(derive_seed(seed, {37}));
  std::vector<double> mapped(bins, 0.0);
  for (std::size_t r = 0; r < bins; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < bins; ++c) s += rng.normal() * t[c];
    mapped[r] = s;
  }
  if (l2_norm(mapped) == 0.0 || l2_norm(v) == 0.0) return 0.0;
  return clamp01(cosine_similarity(mapped, v));
}

ConsistencyReport evaluate_integration(std::string_view text, const GeneratedImage& image,
                                       IntegrationDirection direction,
                                       std::span<const std::string> concepts,
                                       const ConsistencyConfig& config) {
  const auto& proj = config.shared_projection();
  const auto tokens = tokenize(text);
  const auto text_emb = embed_text(tokens);
  const auto image_feat = extract_image_features(image.pixels);

  AlignmentInputs in;
  in.text = project_to_shared(text_emb.values, Modality::text, proj);
  in.image = project_to_shared(image_feat.values, Modality::image, proj);
  RendererConfig rc{image.pixels.extent(0), image.pixels.extent(1), image.pixels.extent(2)};
  for (std::size_t j = 0; j < config.distractors; ++j) {
    SplitMix64 rng(derive_seed(config.seed, {41, j}));
    Tokens words;
    for (int k = 0; k < 6; ++k)
      words.emplace_back(kDistractorVocabulary[rng.below(std::size(kDistractorVocabulary))]);
    std::vector<double> latent(kLatentDim);
    for (double& z : latent) z = rng.normal();
    const auto pixels = render_domain(kDomains[j % 3], latent, rc);
    in.distractor_text.push_back(
        project_to_shared(embed_text(words).values, Modality::text, proj));
    in.distractor_image.push_back(
        project_to_shared(extract_image_features(pixels).values, Modality::image, proj));
  }
  in.text_keywords = keyword_extract(tokens);
  in.image_keywords = object_detect(image);
  in.concepts.assign(concepts.begin(), concepts.end());
  in.semantic_alignment = semantic_alignment(text_emb, image_feat, config.seed);
  return assess_alignment(in, direction, config);
}

double text_tag_similarity(std::string_view text, const GeneratedImage& image) {
  const auto kw = keyword_extract(tokenize(text));
  const auto tags = object_detect(image);
  if (kw.empty() || tags.empty()) return 0.0;
  const auto a = embed_text(Tokens(kw.begin(), kw.end()));
  const auto b = embed_text(Tokens(tags.begin(), tags.end()));
  return clamp01((cosine_similarity(a.values, b.values) + 1.0) / 2.0);
}

}  // namespace mats
