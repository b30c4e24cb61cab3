#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mats/embeddings/tokenize.hpp"

namespace mats {

struct TextMetricReport {
  double bleu = 0.0;
  double rouge1_f1 = 0.0;
  std::size_t word_count = 0;
  double coherence = 0.0;
  double diversity = 0.0;
};

// Named weights over one of two key sets:
//   text:  bleu, rouge, coherence, diversity
//   image: similarity, quality, diversity
// Nonnegative, summing to 1 within 1e-9 (checked by validate()).
struct RewardWeights {
  std::map<std::string, double> weights;

  void validate() const;
  double at(const std::string& key) const;

  // 0.4 BLEU + 0.3 ROUGE + 0.2 coherence + 0.1 diversity.
  static RewardWeights text_preset();
  // 0.5 similarity + 0.3 quality + 0.2 diversity.
  static RewardWeights image_preset();
};

// Sentence-level BLEU with add-one smoothing on every modified n-gram
// precision and brevity penalty exp(min(0, 1 - |ref| / |cand|)). Identical
// token sequences score exactly 1.
double bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n = 4);

// Clipped unigram overlap F1; 0 when nothing overlaps.
double rouge1_f1(const Tokens& candidate, const Tokens& reference);

std::size_t word_count(std::string_view text);

// distinct-2: unique bigrams / total bigrams; 0 for fewer than two tokens.
double diversity(const Tokens& tokens);

// Sentences end at '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view text);

// Mean over adjacent sentence pairs of max(0, cosine of hashed embeddings);
// 1 when there are fewer than two non-empty sentences.
double coherence(std::string_view text);

TextMetricReport evaluate_text(std::string_view candidate, std::string_view reference);

// Weighted sum of report components under text-side weights. Throws
// ConfigError on keys outside {bleu, rouge, coherence, diversity} or when the
// weights are not a valid simplex.
double text_reward(const TextMetricReport& report, const RewardWeights& weights);

}  // namespace mats
