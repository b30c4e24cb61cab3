#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mats/embeddings/tokenize.hpp"
#include "mats/numerics/tensor.hpp"

namespace mats {

inline constexpr std::size_t kTextDim = 768;
inline constexpr std::size_t kImageDim = 2048;
inline constexpr std::size_t kSharedDim = 256;

enum class Modality { text, image };

struct TextEmbedding {
  std::vector<double> values;  // kTextDim, unit norm
  std::size_t source_token_count = 0;
};

struct ImageFeature {
  std::vector<double> values;  // kImageDim, unit norm
};

struct SharedEmbedding {
  std::vector<double> values;  // shared_dim, unit norm
  Modality modality = Modality::text;
};

struct ProjectionParams {
  std::size_t shared_dim = kSharedDim;
  std::vector<double> text;   // shared_dim x kTextDim
  std::vector<double> image;  // shared_dim x kImageDim
  std::uint64_t seed = 0;
};

// Hashed bag of words: bucket = fnv1a64(token) % 768, term frequencies
// accumulated, then L2-normalized. Throws EmptyInputError on no tokens.
TextEmbedding embed_text(const Tokens& tokens);
TextEmbedding embed_text(std::string_view text);
std::size_t text_bucket(std::string_view token);

// Pooled per-block statistics over a 15x15 grid (per channel: mean - 0.5,
// standard deviation, mean absolute forward difference), zero-padded or
// truncated to 2047 entries, followed by a constant 0.01 bias entry, then
// L2-normalized. Requires an H x W x C tensor with H, W >= 8 and values in [0, 1].
ImageFeature extract_image_features(const Tensor& image);

ProjectionParams make_projection(std::uint64_t seed, std::size_t shared_dim = kSharedDim);

// Linear map into the shared space followed by L2 normalization.
SharedEmbedding project_to_shared(std::span<const double> feature, Modality side,
                                  const ProjectionParams& params);

// dot(a, b) / (|a||b|) clamped to [-1, 1]; symmetric in its arguments.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace mats
