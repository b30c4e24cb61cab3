#include "mats/numerics/attention.hpp"

#include <cmath>
#include <string>

#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/numerics/softmax.hpp"

namespace mats {

namespace {

std::vector<double> project(const std::vector<double>& m, std::size_t rows,
                            const std::vector<double>& x) {
  const std::size_t cols = x.size();
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c] * x[c];
    y[r] = s;
  }
  return y;
}

void check_sequence(const Sequence& s, std::size_t dim, const char* what) {
  if (s.empty()) throw InvalidArgument(std::string("multi_head_attention: empty ") + what);
  for (const auto& v : s)
    if (v.size() != dim)
      throw InvalidArgument(std::string("multi_head_attention: ") + what +
                            " element has wrong model dimension");
}

}  // namespace

AttentionParams make_attention(std::size_t model_dim, std::size_t head_count,
                               std::size_t layer_count, std::uint64_t seed) {
  if (model_dim == 0 || head_count == 0 || layer_count == 0)
    throw ConfigError("attention: dimensions must be positive");
  if (model_dim % head_count != 0)
    throw ConfigError("attention: model dimension " + std::to_string(model_dim) +
                      " not divisible by head count " + std::to_string(head_count));
  AttentionParams p;
  p.model_dim = model_dim;
  p.head_count = head_count;
  p.layer_count = layer_count;
  const std::size_t hd = model_dim / head_count;
  SplitMix64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(model_dim + hd));
  for (std::size_t l = 0; l < layer_count; ++l) {
    AttentionLayer layer;
    for (std::size_t h = 0; h < head_count; ++h) {
      AttentionHead head;
      head.query.resize(hd * model_dim);
      head.key.resize(hd * model_dim);
      for (double& w : head.query) w = rng.uniform(-limit, limit);
      for (double& w : head.key) w = rng.uniform(-limit, limit);
      head.value.assign(hd * model_dim, 0.0);
      for (std::size_t r = 0; r < hd; ++r) head.value[r * model_dim + h * hd + r] = 1.0;
      layer.heads.push_back(std::move(head));
    }
    layer.output.assign(model_dim * model_dim, 0.0);
    for (std::size_t i = 0; i < model_dim; ++i) layer.output[i * model_dim + i] = 1.0;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

AttentionResult multi_head_attention(const AttentionParams& params, const Sequence& query,
                                     const Sequence& key, const Sequence& value) {
  const std::size_t d = params.model_dim;
  if (d == 0 || params.head_count == 0 || d % params.head_count != 0)
    throw ConfigError("multi_head_attention: model dimension not divisible by head count");
  if (params.layers.size() != params.layer_count)
    throw ConfigError("multi_head_attention: layer count mismatch");
  check_sequence(query, d, "query");
  check_sequence(key, d, "key");
  check_sequence(value, d, "value");
  if (key.size() != value.size())
    throw InvalidArgument("multi_head_attention: key/value length mismatch");

  const std::size_t hd = params.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  AttentionResult result;
  Sequence current = query;
  for (const auto& layer : params.layers) {
    if (layer.heads.size() != params.head_count)
      throw ConfigError("multi_head_attention: head count mismatch");
    std::vector<Sequence> layer_weights;
    Sequence concat(current.size(), std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < params.head_count; ++h) {
      const auto& head = layer.heads[h];
      Sequence keys, values;
      for (std::size_t j = 0; j < key.size(); ++j) {
        keys.push_back(project(head.key, hd, key[j]));
        values.push_back(project(head.value, hd, value[j]));
      }
      Sequence head_weights;
      for (std::size_t i = 0; i < current.size(); ++i) {
        const auto q = project(head.query, hd, current[i]);
        std::vector<double> scores(key.size());
        for (std::size_t j = 0; j < key.size(); ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += q[c] * keys[j][c];
          scores[j] = s * scale;
        }
        auto w = softmax(scores);
        for (std::size_t j = 0; j < key.size(); ++j)
          for (std::size_t c = 0; c < hd; ++c) concat[i][h * hd + c] += w[j] * values[j][c];
        head_weights.push_back(std::move(w));
      }
      layer_weights.push_back(std::move(head_weights));
    }
    Sequence next;
    next.reserve(current.size());
    for (const auto& row : concat) next.push_back(project(layer.output, d, row));
    result.weights.push_back(std::move(layer_weights));
    current = std::move(next);
  }
  result.output = std::move(current);
  return result;
}

}  // namespace mats
