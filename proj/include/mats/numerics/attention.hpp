#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mats {

using Sequence = std::vector<std::vector<double>>;

struct AttentionHead {
  // head_dim x model_dim, row-major.
  std::vector<double> query;
  std::vector<double> key;
  std::vector<double> value;
};

struct AttentionLayer {
  std::vector<AttentionHead> heads;
  std::vector<double> output;  // model_dim x model_dim
};

struct AttentionParams {
  std::size_t model_dim = 0;
  std::size_t head_count = 4;
  std::size_t layer_count = 2;
  std::vector<AttentionLayer> layers;

  std::size_t head_dim() const { return model_dim / head_count; }
};

// Seeded query/key projections; value projections select each head's slice of
// the input and the output projection is the identity, so every head mixes
// value positions convexly. Throws ConfigError if model_dim % head_count != 0.
AttentionParams make_attention(std::size_t model_dim, std::size_t head_count = 4,
                               std::size_t layer_count = 2, std::uint64_t seed = 0);

struct AttentionResult {
  Sequence output;
  // weights[layer][head][query][key]; each innermost row sums to 1.
  std::vector<std::vector<Sequence>> weights;
};

// Stacked scaled dot-product attention. Layer l attends from the previous
// layer's output (the query sequence for l = 0) over the fixed key/value
// sequences.
AttentionResult multi_head_attention(const AttentionParams& params, const Sequence& query,
                                     const Sequence& key, const Sequence& value);

}  // namespace mats
