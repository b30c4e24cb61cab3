#include "mats/fusion.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <sstream>

#include "mats/error.hpp"
#include "mats/numerics/attention.hpp"
#include "mats/numerics/mlp.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/numerics/softmax.hpp"

namespace mats {

namespace {

void check_inputs(std::span<const GeneratedImage> images) {
  if (images.size() < 2) throw InvalidArgument("fuse: need at least two images");
  const auto& shape = images[0].pixels.shape();
  if (shape.size() != 3) throw InvalidArgument("fuse: images must be H x W x C");
  for (const auto& im : images)
    if (im.pixels.shape() != shape) throw InvalidArgument("fuse: image shapes differ");
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

std::vector<double> normalize_simplex(std::vector<double> w) {
  double s = 0.0;
  for (double v : w) s += v;
  if (!(s > 0.0) || !std::isfinite(s)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (double& v : w) v /= s;
  return w;
}

// Per channel mean and standard deviation of each input, concatenated.
std::vector<double> pooled_channel_stats(std::span<const GeneratedImage> images) {
  std::vector<double> out;
  for (const auto& im : images) {
    const auto& t = im.pixels;
    const std::size_t c = t.extent(2), n = t.extent(0) * t.extent(1);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = t[i * c + ch];
        s += v;
        s2 += v * v;
      }
      const double mean = s / static_cast<double>(n);
      out.push_back(mean);
      out.push_back(std::sqrt(std::max(0.0, s2 / static_cast<double>(n) - mean * mean)));
    }
  }
  return out;
}

std::vector<double> weight_network_logits(std::span<const GeneratedImage> images,
                                          std::uint64_t seed) {
  const auto stats = pooled_channel_stats(images);
  const auto net = make_mlp({stats.size(), 16, images.size()},
                            {Activation::tanh, Activation::identity},
                            derive_seed(seed, {11, images.size(), stats.size()}));
  return mlp_apply(net, stats);
}

std::vector<double> dynamic_weights(std::span<const GeneratedImage> images,
                                    const FusionParams& params) {
  std::vector<double> features;
  for (const auto& im : images) {
    const auto st = image_statistics(im.pixels);
    features.push_back(image_quality_score(im.pixels));
    features.push_back(st.contrast);
    features.push_back(st.sharpness);
    features.push_back(st.complexity);
  }
  std::vector<std::size_t> dims{features.size(), 512};
  for (std::size_t i = 0; i < params.extra_layers; ++i) dims.push_back(512);
  dims.push_back(256);
  dims.push_back(images.size());
  std::vector<Activation> acts(dims.size() - 1, Activation::tanh);
  acts.back() = Activation::identity;
  const auto net =
      make_mlp(dims, acts, derive_seed(params.seed, {13, images.size(), params.extra_layers}));
  return softmax(mlp_apply(net, features));
}

std::vector<double> content_weights(std::span<const GeneratedImage> images,
                                    const TagSet& prompt_tags) {
  std::vector<double> w;
  for (const auto& im : images) {
    std::size_t overlap = 0;
    for (const auto& t : im.concept_tags) overlap += prompt_tags.contains(t) ? 1 : 0;
    w.push_back(static_cast<double>(overlap));
  }
  return normalize_simplex(std::move(w));
}

// Per-channel means of the four quadrants of one patch.
std::vector<double> patch_descriptor(const Tensor& t, std::size_t y0, std::size_t y1,
                                     std::size_t x0, std::size_t x1) {
  const std::size_t c = t.extent(2);
  const std::size_t ym = y0 + std::max<std::size_t>(1, (y1 - y0) / 2);
  const std::size_t xm = x0 + std::max<std::size_t>(1, (x1 - x0) / 2);
  const std::pair<std::size_t, std::size_t> rows[2] = {{y0, ym}, {ym < y1 ? ym : y0, y1}};
  const std::pair<std::size_t, std::size_t> cols[2] = {{x0, xm}, {xm < x1 ? xm : x0, x1}};
  std::vector<double> d;
  d.reserve(4 * c);
  for (const auto& [ra, rb] : rows)
    for (const auto& [ca, cb] : cols)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t y = ra; y < rb; ++y)
          for (std::size_t x = ca; x < cb; ++x) s += t.at(y, x, ch);
        d.push_back(s / static_cast<double>((rb - ra) * (cb - ca)));
      }
  return d;
}

std::vector<std::vector<double>> transformer_weights(std::span<const GeneratedImage> images,
                                                     const FusionParams& params) {
  const auto& t0 = images[0].pixels;
  const std::size_t h = t0.extent(0), w = t0.extent(1), c = t0.extent(2);
  const std::size_t ps = std::max<std::size_t>(1, params.patch_size);
  const auto attn = make_attention(4 * c, params.attention_heads, params.attention_layers,
                                   derive_seed(params.seed, {17, c}));
  const std::size_t k = images.size();
  std::vector<std::vector<double>> maps(k, std::vector<double>(h * w, 0.0));
  for (std::size_t py = 0; py < h; py += ps)
    for (std::size_t px = 0; px < w; px += ps) {
      const std::size_t y1 = std::min(h, py + ps), x1 = std::min(w, px + ps);
      Sequence tokens;
      for (const auto& im : images) tokens.push_back(patch_descriptor(im.pixels, py, y1, px, x1));
      std::vector<double> consensus(tokens[0].size(), 0.0);
      for (const auto& tok : tokens)
        for (std::size_t i = 0; i < tok.size(); ++i) consensus[i] += tok[i] / static_cast<double>(k);
      const auto res = multi_head_attention(attn, {consensus}, tokens, tokens);
      const auto& last = res.weights.back();
      std::vector<double> pw(k, 0.0);
      for (const auto& head : last)
        for (std::size_t j = 0; j < k; ++j) pw[j] += head[0][j] / static_cast<double>(last.size());
      for (std::size_t y = py; y < y1; ++y)
        for (std::size_t x = px; x < x1; ++x)
          for (std::size_t j = 0; j < k; ++j) maps[j][y * w + x] = pw[j];
    }
  return maps;
}

Tensor combine(std::span<const GeneratedImage> images, const FusionWeights& weights) {
  const auto& t0 = images[0].pixels;
  const std::size_t h = t0.extent(0), w = t0.extent(1), c = t0.extent(2);
  Tensor out(t0.shape());
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = p * c + ch;
      double lo = images[0].pixels[i], hi = lo, acc = 0.0;
      for (std::size_t k = 0; k < images.size(); ++k) {
        const double v = images[k].pixels[i];
        const double wk = weights.global.empty() ? weights.per_pixel[k][p] : weights.global[k];
        acc += wk * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      out[i] = std::clamp(acc, lo, hi);
    }
  return out;
}

Tensor simple_mean(std::span<const GeneratedImage> images) {
  const auto& t0 = images[0].pixels;
  Tensor out(t0.shape());
  std::vector<double> vals(images.size());
  const double k = static_cast<double>(images.size());
  for (std::size_t i = 0; i < t0.size(); ++i) {
    for (std::size_t j = 0; j < images.size(); ++j) vals[j] = images[j].pixels[i];
    // Summing in sorted order makes the result independent of input order.
    std::sort(vals.begin(), vals.end());
    double s = 0.0;
    for (double v : vals) s += v;
    out[i] = std::clamp(s / k, vals.front(), vals.back());
  }
  return out;
}

}  // namespace

std::string_view to_string(FusionMethod method) {
  switch (method) {
    case FusionMethod::simple_average: return "simple_average";
    case FusionMethod::weighted_average: return "weighted_average";
    case FusionMethod::attention: return "attention";
    case FusionMethod::transformer: return "transformer";
    case FusionMethod::dynamic_weight: return "dynamic_weight";
    case FusionMethod::content_aware: return "content_aware";
  }
  return "?";
}

FusionSpec parse_fusion_spec(std::string_view name) {
  if (name == "neural") return {FusionMethod::dynamic_weight, 1, "neural"};
  for (auto m : kAllFusionMethods)
    if (to_string(m) == name) return {m, 0, std::string(name)};
  throw ConfigError("unknown fusion method '" + std::string(name) + "'");
}

std::vector<FusionSpec> parse_fusion_list(std::string_view comma_separated) {
  std::vector<FusionSpec> out;
  std::istringstream in{std::string(comma_separated)};
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(parse_fusion_spec(item));
  if (out.empty()) throw ConfigError("empty fusion method list");
  return out;
}

std::vector<FusionSpec> all_fusion_specs() {
  std::vector<FusionSpec> out;
  for (auto m : kAllFusionMethods) out.push_back({m, 0, std::string(to_string(m))});
  return out;
}

FusionResult fuse_with_weights(std::span<const GeneratedImage> images, FusionMethod method,
                               const FusionParams& params) {
  check_inputs(images);
  const std::size_t k = images.size();
  FusionResult result;
  switch (method) {
    case FusionMethod::simple_average:
      result.weights.global.assign(k, 1.0 / static_cast<double>(k));
      result.image.pixels = simple_mean(images);
      break;
    case FusionMethod::weighted_average:
      if (params.explicit_weights) {
        const auto& w = *params.explicit_weights;
        if (w.size() != k) throw InvalidArgument("fuse: explicit weight count mismatch");
        double s = 0.0;
        for (double v : w) {
          if (!(v >= 0.0)) throw InvalidArgument("fuse: explicit weights must be nonnegative");
          s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("fuse: explicit weights must sum to 1");
        result.weights.global = w;
      } else {
        auto raw = weight_network_logits(images, params.seed);
        for (double& v : raw) v = softplus(v);
        result.weights.global = normalize_simplex(std::move(raw));
      }
      break;
    case FusionMethod::attention:
      result.weights.global = softmax(weight_network_logits(images, params.seed));
      break;
    case FusionMethod::transformer:
      result.weights.per_pixel = transformer_weights(images, params);
      break;
    case FusionMethod::dynamic_weight:
      result.weights.global = dynamic_weights(images, params);
      break;
    case FusionMethod::content_aware:
      result.weights.global = content_weights(images, params.prompt_tags);
      break;
  }
  if (method != FusionMethod::simple_average) result.image.pixels = combine(images, result.weights);
  for (const auto& im : images)
    result.image.concept_tags.insert(im.concept_tags.begin(), im.concept_tags.end());
  result.image.provenance = {"fused:" + std::string(to_string(method)), params.seed, 0};
  return result;
}

GeneratedImage fuse(std::span<const GeneratedImage> images, FusionMethod method,
                    const FusionParams& params) {
  return fuse_with_weights(images, method, params).image;
}

ImageStatistics image_statistics(const Tensor& pixels) {
  if (pixels.rank() != 3) throw InvalidArgument("image_statistics: expected H x W x C");
  const std::size_t h = pixels.extent(0), w = pixels.extent(1), c = pixels.extent(2);
  std::vector<double> lum(h * w);
  for (std::size_t p = 0; p < h * w; ++p) {
    if (c >= 3)
      lum[p] = 0.299 * pixels[p * c] + 0.587 * pixels[p * c + 1] + 0.114 * pixels[p * c + 2];
    else
      lum[p] = pixels[p * c];
  }
  ImageStatistics st;
  const double n = static_cast<double>(lum.size());
  double s = 0.0;
  for (double v : lum) s += v;
  st.mean_luminance = s / n;
  double ss = 0.0;
  for (double v : lum) ss += (v - st.mean_luminance) * (v - st.mean_luminance);
  const auto [lo, hi] = std::minmax_element(lum.begin(), lum.end());
  // The rounded mean of identical values can differ from them in the last bit.
  st.contrast = *lo == *hi ? 0.0 : std::sqrt(ss / n);
  double g = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 1 < h; ++y)
    for (std::size_t x = 0; x + 1 < w; ++x) {
      const double gx = lum[y * w + x + 1] - lum[y * w + x];
      const double gy = lum[(y + 1) * w + x] - lum[y * w + x];
      g += std::sqrt(gx * gx + gy * gy);
      ++count;
    }
  st.sharpness = count ? g / static_cast<double>(count) : 0.0;
  std::array<double, 16> hist{};
  for (double v : lum) hist[std::min<std::size_t>(15, static_cast<std::size_t>(v * 16.0))] += 1.0;
  double entropy = 0.0;
  for (double b : hist)
    if (b > 0.0) entropy -= (b / n) * std::log(b / n);
  st.complexity = entropy / std::log(16.0);
  return st;
}

double image_quality_score(const Tensor& pixels) {
  const auto st = image_statistics(pixels);
  return 0.5 * std::min(1.0, st.contrast / kContrastCap) +
         0.5 * std::min(1.0, st.sharpness / kSharpnessCap);
}

double image_quality_score(const GeneratedImage& image) {
  return image_quality_score(image.pixels);
}

double overall_score(double quality, double similarity, OverallWeighting weighting) {
  if (!(weighting.quality >= 0.0) || !(weighting.similarity >= 0.0) ||
      std::abs(weighting.quality + weighting.similarity - 1.0) > 1e-9)
    throw ConfigError("overall_score: weights must be nonnegative and sum to 1");
  return weighting.quality * quality + weighting.similarity * similarity;
}

std::vector<FusionReport> benchmark_fusion(std::span<const GeneratedImage> images,
                                           std::span<const FusionSpec> methods,
                                           const SimilarityFn& similarity,
                                           const FusionParams& params,
                                           OverallWeighting weighting) {
  if (methods.empty()) throw InvalidArgument("benchmark_fusion: no methods");
  std::vector<FusionReport> reports;
  for (const auto& spec : methods) {
    FusionReport r;
    r.method = spec.name.empty() ? std::string(to_string(spec.method)) : spec.name;
    try {
      FusionParams p = params;
      p.extra_layers = spec.extra_layers;
      const auto start = std::chrono::steady_clock::now();
      const auto fused = fuse(images, spec.method, p);
      const auto stop = std::chrono::steady_clock::now();
      r.elapsed_seconds = std::chrono::duration<double>(stop - start).count();
      r.quality = image_quality_score(fused);
      r.similarity = similarity(fused);
      r.overall = overall_score(r.quality, r.similarity, weighting);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string fusion_reports_csv(std::span<const FusionReport> reports) {
  std::string out = "Method,Quality,Similarity,Overall,TimeSeconds\n";
  for (const auto& r : reports) {
    if (r.error)
      out += fmt::format("{},error,error,error,error\n", r.method);
    else
      out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.method, r.quality, r.similarity,
                         r.overall, r.elapsed_seconds);
  }
  return out;
}

}  // namespace mats
