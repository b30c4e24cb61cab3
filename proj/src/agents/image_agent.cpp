#include <algorithm>
#include <cmath>
#include <numbers>

#include "mats/agents/agents.hpp"
#include "mats/embeddings/embeddings.hpp"
#include "mats/error.hpp"

namespace mats {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Latent entry i squashed into (-1, 1); 0 for the zero latent.
double param(std::span<const double> z, std::size_t i) {
  return i < z.size() ? std::tanh(z[i]) : 0.0;
}

struct Rgb {
  double r, g, b;
};

void put(Tensor& img, std::size_t y, std::size_t x, Rgb c) {
  const std::size_t ch = img.extent(2);
  if (ch == 1) {
    img.at(y, x, 0) = clamp01(0.299 * c.r + 0.587 * c.g + 0.114 * c.b);
    return;
  }
  const double v[3] = {c.r, c.g, c.b};
  for (std::size_t k = 0; k < ch; ++k) img.at(y, x, k) = clamp01(v[k % 3]);
}

Rgb mix(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Rectilinear skyline: sky, five blocks with window grids and darker edges.
void render_architecture(Tensor& img, std::span<const double> z) {
  const std::size_t h = img.extent(0), w = img.extent(1);
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  const Rgb sky_top{0.45 + 0.2 * param(z, 0), 0.62 + 0.15 * param(z, 1), 0.88 + 0.1 * param(z, 2)};
  const Rgb sky_low{0.85 + 0.1 * param(z, 0), 0.8 + 0.1 * param(z, 1), 0.7 + 0.1 * param(z, 2)};
  const double ground = H * (0.82 + 0.08 * param(z, 3));
  const Rgb stone{0.5 + 0.15 * param(z, 10), 0.48 + 0.12 * param(z, 11), 0.45 + 0.1 * param(z, 12)};
  const Rgb window{0.95, 0.85 + 0.1 * param(z, 13), 0.45 + 0.2 * param(z, 14)};
  const double period = 4.0 + std::round(2.0 * (param(z, 15) + 1.0));
  constexpr int kBlocks = 5;

  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y), fx = static_cast<double>(x);
      Rgb c = mix(sky_top, sky_low, fy / H);
      if (fy >= ground) c = {0.3 + 0.1 * param(z, 4), 0.3, 0.28};
      const int b = std::min(kBlocks - 1, static_cast<int>(fx / W * kBlocks));
      const double x0 = W * b / kBlocks + W * 0.02, x1 = W * (b + 1) / kBlocks - W * 0.02;
      const double height = 0.3 + 0.25 * (0.5 + 0.5 * std::sin(2.1 * b + 1.0)) +
                            0.15 * param(z, 5 + static_cast<std::size_t>(b));
      const double top = ground - H * height;
      if (fx >= x0 && fx < x1 && fy >= top && fy < ground) {
        const double shade = 0.9 + 0.1 * std::cos(0.7 * b);
        c = {stone.r * shade, stone.g * shade, stone.b * shade};
        const double lx = fx - x0, ly = fy - top;
        const bool wx = std::fmod(lx, period) >= 1.0 && std::fmod(lx, period) < period - 1.5;
        const bool wy = std::fmod(ly, period) >= 1.0 && std::fmod(ly, period) < period - 1.5;
        if (wx && wy && ly > 1.0) c = window;
        if (lx < 1.0 || x1 - fx <= 1.0 || ly < 1.0) c = {stone.r * 0.45, stone.g * 0.45, stone.b * 0.45};
      }
      put(img, y, x, c);
    }
}

// Centered radial composition: vignette background, face ellipse, eyes, hair.
void render_portrait(Tensor& img, std::span<const double> z) {
  const std::size_t h = img.extent(0), w = img.extent(1);
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  const Rgb bg{0.25 + 0.15 * param(z, 0), 0.22 + 0.12 * param(z, 1), 0.3 + 0.15 * param(z, 2)};
  const double cx = W * (0.5 + 0.08 * param(z, 3)), cy = H * (0.48 + 0.05 * param(z, 4));
  const double rx = W * 0.22 * (1.0 + 0.15 * param(z, 5));
  const double ry = H * 0.3 * (1.0 + 0.15 * param(z, 6));
  const Rgb skin{0.85 + 0.1 * param(z, 7), 0.68 + 0.1 * param(z, 7), 0.55 + 0.1 * param(z, 8)};
  const Rgb hair{0.75 + 0.2 * param(z, 9), 0.75 + 0.2 * param(z, 9), 0.78 + 0.2 * param(z, 10)};
  const double eye_dy = -0.15 * ry, eye_dx = 0.38 * rx, eye_r = std::max(1.0, 0.12 * rx);

  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double radial = std::sqrt(dx * dx / (W * W) + dy * dy / (H * H)) * 2.0;
      const double vignette = 1.0 - 0.6 * std::min(1.0, radial);
      Rgb c{bg.r * vignette, bg.g * vignette, bg.b * vignette};
      const double e = dx * dx / (rx * rx) + dy * dy / (ry * ry);
      if (e <= 1.0) {
        const double shade = 1.0 - 0.35 * e;
        c = {skin.r * shade, skin.g * shade, skin.b * shade};
        if (dy < -0.55 * ry) c = hair;
        for (double side : {-1.0, 1.0}) {
          const double ex = dx - side * eye_dx, ey = dy - eye_dy;
          if (ex * ex + ey * ey <= eye_r * eye_r) c = {0.12, 0.1, 0.1};
        }
        if (dy > 0.3 * ry && std::abs(dx) < 0.3 * rx && std::abs(dy - 0.45 * ry) < 0.06 * ry)
          c = {0.6, 0.3, 0.3};
      }
      put(img, y, x, c);
    }
}

// Horizontal bands: sky gradient, sinusoidal ridge line, striped water/ground.
void render_landscape(Tensor& img, std::span<const double> z) {
  const std::size_t h = img.extent(0), w = img.extent(1);
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  const Rgb sky_top{0.3 + 0.15 * param(z, 0), 0.5 + 0.15 * param(z, 1), 0.85 + 0.1 * param(z, 2)};
  const Rgb sky_low{0.9, 0.8 + 0.1 * param(z, 1), 0.65 + 0.1 * param(z, 2)};
  const double horizon = H * (0.5 + 0.08 * param(z, 3));
  const double amp = H * (0.16 + 0.05 * param(z, 4));
  const double freq = 1.5 + param(z, 5), phase = kPi * param(z, 6);
  const Rgb rock{0.35 + 0.1 * param(z, 7), 0.38 + 0.1 * param(z, 7), 0.42 + 0.1 * param(z, 8)};
  const Rgb water{0.2 + 0.1 * param(z, 9), 0.4 + 0.1 * param(z, 9), 0.6 + 0.15 * param(z, 10)};
  const double stripe = 3.0 + 2.0 * (param(z, 11) + 1.0);

  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y), fx = static_cast<double>(x);
      const double ridge =
          horizon - amp * (0.5 + 0.5 * std::sin(2.0 * kPi * freq * fx / W + phase));
      Rgb c;
      if (fy < ridge) {
        c = mix(sky_top, sky_low, fy / std::max(1.0, horizon));
      } else if (fy < horizon) {
        const double snow = (fy - ridge) < amp * 0.15 ? 0.35 : 0.0;
        c = mix(rock, {1.0, 1.0, 1.0}, snow);
      } else {
        const double depth = (fy - horizon) / std::max(1.0, H - horizon);
        const double band = 0.08 * std::sin(2.0 * kPi * fy / stripe);
        c = {water.r * (1.0 - 0.3 * depth) + band, water.g * (1.0 - 0.3 * depth) + band,
             water.b * (1.0 - 0.2 * depth) + band};
      }
      put(img, y, x, c);
    }
}

}  // namespace

std::string ImageAgentSpec::id() const { return "image:" + std::string(to_string(domain)); }

ImageAgentSpec make_image_agent(Domain domain, TagSet lexicon_tags, std::uint64_t seed,
                                RendererConfig renderer) {
  if (renderer.height < 8 || renderer.width < 8 || renderer.channels == 0)
    throw ConfigError("image agent: renderer must be at least 8x8 with a channel");
  ImageAgentSpec a;
  a.domain = domain;
  a.seed = seed;
  a.renderer = renderer;
  a.lexicon_tags = std::move(lexicon_tags);
  a.specialized_layer = make_mlp({kTextDim, kLatentDim}, {Activation::tanh}, seed);
  return a;
}

TagSet base_tags(Domain domain) {
  switch (domain) {
    case Domain::architecture: return {"architecture", "building"};
    case Domain::portrait: return {"portrait", "person"};
    case Domain::landscape: return {"landscape", "horizon"};
  }
  return {};
}

AgentLatent route_features(const ImageAgentSpec& agent, std::span<const double> text_features) {
  if (text_features.size() != kTextDim)
    throw InvalidArgument("route_features: expected a 768-dimensional feature vector");
  if (std::abs(l2_norm(text_features) - 1.0) > 1e-9)
    throw InvalidArgument("route_features: features must be unit norm");
  if (agent.specialized_layer.in_dim() != kTextDim)
    throw InvalidArgument("route_features: specialized layer input dimension mismatch");
  return {mlp_apply(agent.specialized_layer, text_features), agent.id()};
}

Tensor render_domain(Domain domain, std::span<const double> latent, const RendererConfig& config) {
  for (double v : latent)
    if (!std::isfinite(v)) throw NumericError("render: non-finite latent");
  Tensor img({config.height, config.width, config.channels});
  switch (domain) {
    case Domain::architecture: render_architecture(img, latent); break;
    case Domain::portrait: render_portrait(img, latent); break;
    case Domain::landscape: render_landscape(img, latent); break;
  }
  return img;
}

GeneratedImage generate_image(const ImageAgentSpec& agent, const AgentLatent& latent,
                              const TagSet& prompt_tags) {
  GeneratedImage out;
  out.pixels = render_domain(agent.domain, latent.values, agent.renderer);
  out.concept_tags = base_tags(agent.domain);
  for (const auto& t : prompt_tags)
    if (agent.lexicon_tags.contains(t)) out.concept_tags.insert(t);
  std::string joined;
  for (const auto& t : prompt_tags) joined += t + ",";
  out.provenance = {agent.id(), agent.seed, fnv1a64(joined)};
  return out;
}

}  // namespace mats
