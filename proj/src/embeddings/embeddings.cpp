#include "mats/embeddings/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"

namespace mats {

namespace {

constexpr std::size_t kGrid = 15;
constexpr double kImageBias = 0.01;

std::pair<std::size_t, std::size_t> block_range(std::size_t i, std::size_t n) {
  std::size_t lo = i * n / kGrid;
  std::size_t hi = (i + 1) * n / kGrid;
  if (lo >= n) lo = n - 1;
  if (hi <= lo) hi = lo + 1;
  return {lo, std::min(hi, n)};
}

}  // namespace

std::size_t text_bucket(std::string_view token) { return fnv1a64(token) % kTextDim; }

TextEmbedding embed_text(const Tokens& tokens) {
  if (tokens.empty()) throw EmptyInputError("embed_text: no tokens after normalization");
  std::vector<double> v(kTextDim, 0.0);
  for (const auto& t : tokens) v[text_bucket(t)] += 1.0;
  return {normalized(v), tokens.size()};
}

TextEmbedding embed_text(std::string_view text) { return embed_text(tokenize(text)); }

ImageFeature extract_image_features(const Tensor& image) {
  if (image.rank() != 3) throw InvalidArgument("extract_image_features: expected H x W x C");
  const std::size_t h = image.extent(0), w = image.extent(1), c = image.extent(2);
  if (h < 8 || w < 8) throw InvalidArgument("extract_image_features: image must be >= 8x8");
  for (double v : image.data())
    if (!(v >= 0.0 && v <= 1.0))
      throw InvalidArgument("extract_image_features: pixel outside [0, 1]");

  // Mean absolute forward difference magnitude per pixel and channel.
  std::vector<double> grad(image.size(), 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double p = image.at(y, x, ch);
        const double gx = x + 1 < w ? image.at(y, x + 1, ch) - p : 0.0;
        const double gy = y + 1 < h ? image.at(y + 1, x, ch) - p : 0.0;
        grad[(y * w + x) * c + ch] = std::abs(gx) + std::abs(gy);
      }

  std::vector<double> raw;
  raw.reserve(kGrid * kGrid * c * 3);
  for (std::size_t by = 0; by < kGrid; ++by) {
    const auto [y0, y1] = block_range(by, h);
    for (std::size_t bx = 0; bx < kGrid; ++bx) {
      const auto [x0, x1] = block_range(bx, w);
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0, sum2 = 0.0, gsum = 0.0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) {
            const double p = image.at(y, x, ch);
            sum += p;
            sum2 += p * p;
            gsum += grad[(y * w + x) * c + ch];
          }
        const double mean = sum / n;
        const double var = std::max(0.0, sum2 / n - mean * mean);
        raw.push_back(mean - 0.5);
        raw.push_back(std::sqrt(var));
        raw.push_back(gsum / n);
      }
    }
  }
  raw.resize(kImageDim - 1, 0.0);
  raw.push_back(kImageBias);
  return {normalized(raw)};
}

ProjectionParams make_projection(std::uint64_t seed, std::size_t shared_dim) {
  if (shared_dim == 0) throw ConfigError("projection: shared dimension must be positive");
  ProjectionParams p;
  p.shared_dim = shared_dim;
  p.seed = seed;
  SplitMix64 rng(seed);
  const double ts = 1.0 / std::sqrt(static_cast<double>(kTextDim));
  const double is = 1.0 / std::sqrt(static_cast<double>(kImageDim));
  p.text.resize(shared_dim * kTextDim);
  for (double& x : p.text) x = rng.normal() * ts;
  p.image.resize(shared_dim * kImageDim);
  for (double& x : p.image) x = rng.normal() * is;
  return p;
}

SharedEmbedding project_to_shared(std::span<const double> feature, Modality side,
                                  const ProjectionParams& params) {
  const std::size_t in = side == Modality::text ? kTextDim : kImageDim;
  const auto& m = side == Modality::text ? params.text : params.image;
  if (feature.size() != in)
    throw InvalidArgument("project_to_shared: feature has " + std::to_string(feature.size()) +
                          " entries, expected " + std::to_string(in));
  if (m.size() != params.shared_dim * in)
    throw InvalidArgument("project_to_shared: projection matrix has the wrong shape");
  std::vector<double> out(params.shared_dim, 0.0);
  for (std::size_t r = 0; r < params.shared_dim; ++r) {
    const double* row = &m[r * in];
    double s = 0.0;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * feature[i];
    out[r] = s;
  }
  const double n = l2_norm(out);
  if (!(n > 1e-300) || !std::isfinite(n))
    throw DegenerateProjectionError("project_to_shared: projection collapsed to zero");
  for (double& x : out) x /= n;
  return {std::move(out), side};
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_similarity: length mismatch");
  const double na = l2_norm(a), nb = l2_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("cosine_similarity: zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace mats
