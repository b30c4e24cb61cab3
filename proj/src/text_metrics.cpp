#include "mats/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mats/embeddings/embeddings.hpp"
#include "mats/error.hpp"

namespace mats {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

void require_nonempty(const Tokens& candidate, const Tokens& reference, const char* what) {
  if (candidate.empty() || reference.empty())
    throw EmptyInputError(std::string(what) + ": empty candidate or reference");
}

}  // namespace

void RewardWeights::validate() const {
  double sum = 0.0;
  for (const auto& [k, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("reward weight '" + k + "' invalid");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("reward weights must sum to 1");
}

double RewardWeights::at(const std::string& key) const {
  auto it = weights.find(key);
  return it == weights.end() ? 0.0 : it->second;
}

RewardWeights RewardWeights::text_preset() {
  return {{{"bleu", 0.4}, {"rouge", 0.3}, {"coherence", 0.2}, {"diversity", 0.1}}};
}

RewardWeights RewardWeights::image_preset() {
  return {{{"similarity", 0.5}, {"quality", 0.3}, {"diversity", 0.2}}};
}

double bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n) {
  require_nonempty(candidate, reference, "bleu");
  if (max_n == 0) throw InvalidArgument("bleu: max_n must be positive");
  if (candidate == reference) return 1.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = count_ngrams(candidate, n);
    const auto ref = count_ngrams(reference, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(c, it->second);
    }
    log_sum += std::log((static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0));
  }
  const double ratio =
      static_cast<double>(reference.size()) / static_cast<double>(candidate.size());
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(max_n)), 0.0, 1.0);
}

double rouge1_f1(const Tokens& candidate, const Tokens& reference) {
  require_nonempty(candidate, reference, "rouge1_f1");
  const auto cand = count_ngrams(candidate, 1);
  const auto ref = count_ngrams(reference, 1);
  std::size_t overlap = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  if (overlap == 0) return 0.0;
  // 2PR / (P + R) with P = o/|c|, R = o/|r| reduces to 2o / (|c| + |r|).
  return 2.0 * static_cast<double>(overlap) /
         static_cast<double>(candidate.size() + reference.size());
}

std::size_t word_count(std::string_view text) { return tokenize(text).size(); }

double diversity(const Tokens& tokens) {
  if (tokens.size() < 2) return 0.0;
  std::set<std::pair<std::string, std::string>> unique;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) unique.emplace(tokens[i], tokens[i + 1]);
  return static_cast<double>(unique.size()) / static_cast<double>(tokens.size() - 1);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    cur.push_back(c);
    const bool terminal = c == '.' || c == '!' || c == '?';
    const bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\t' ||
                          text[i + 1] == '\n' || text[i + 1] == '\r';
    if (terminal && boundary) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double coherence(std::string_view text) {
  std::vector<TextEmbedding> sentences;
  for (const auto& s : split_sentences(text)) {
    const auto tokens = tokenize(s);
    if (!tokens.empty()) sentences.push_back(embed_text(tokens));
  }
  if (sentences.size() < 2) return 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < sentences.size(); ++i)
    sum += std::max(0.0, cosine_similarity(sentences[i].values, sentences[i + 1].values));
  return sum / static_cast<double>(sentences.size() - 1);
}

TextMetricReport evaluate_text(std::string_view candidate, std::string_view reference) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  TextMetricReport r;
  r.bleu = bleu(cand, ref);
  r.rouge1_f1 = rouge1_f1(cand, ref);
  r.word_count = cand.size();
  r.coherence = coherence(candidate);
  r.diversity = diversity(cand);
  return r;
}

double text_reward(const TextMetricReport& report, const RewardWeights& weights) {
  static const std::set<std::string> allowed{"bleu", "rouge", "coherence", "diversity"};
  for (const auto& [k, w] : weights.weights)
    if (!allowed.contains(k)) throw ConfigError("text_reward: unknown weight key '" + k + "'");
  weights.validate();
  return weights.at("bleu") * report.bleu + weights.at("rouge") * report.rouge1_f1 +
         weights.at("coherence") * report.coherence + weights.at("diversity") * report.diversity;
}

}  // namespace mats
