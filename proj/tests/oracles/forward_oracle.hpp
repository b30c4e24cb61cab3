#pragma once

// Straight-line reimplementations of the dense forward pass and of
// multi-head attention, written without the library's helpers.

#include <cmath>
#include <vector>

#include "mats/numerics/attention.hpp"
#include "mats/numerics/mlp.hpp"

namespace oracle {

inline std::vector<double> mlp(const mats::MLPParams& p, std::vector<double> x) {
  for (const auto& L : p.layers) {
    std::vector<double> y(L.out_dim);
    for (std::size_t o = 0; o < L.out_dim; ++o) {
      double s = L.bias[o];
      for (std::size_t i = 0; i < L.in_dim; ++i) s += L.weight[o * L.in_dim + i] * x[i];
      switch (L.activation) {
        case mats::Activation::tanh: s = std::tanh(s); break;
        case mats::Activation::relu: s = s > 0.0 ? s : 0.0; break;
        case mats::Activation::identity: break;
      }
      y[o] = s;
    }
    x = std::move(y);
  }
  return x;
}

// One (layer, head, query) at a time with explicit index arithmetic.
inline mats::Sequence attention(const mats::AttentionParams& p, const mats::Sequence& query,
                                const mats::Sequence& key, const mats::Sequence& value) {
  const std::size_t d = p.model_dim, hd = d / p.head_count;
  mats::Sequence cur = query;
  for (const auto& layer : p.layers) {
    mats::Sequence next(cur.size(), std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < cur.size(); ++i) {
      std::vector<double> concat(d, 0.0);
      for (std::size_t h = 0; h < p.head_count; ++h) {
        const auto& H = layer.heads[h];
        std::vector<double> logits(key.size());
        for (std::size_t j = 0; j < key.size(); ++j) {
          double s = 0.0;
          for (std::size_t r = 0; r < hd; ++r) {
            double q = 0.0, k = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              q += H.query[r * d + c] * cur[i][c];
              k += H.key[r * d + c] * key[j][c];
            }
            s += q * k;
          }
          logits[j] = s / std::sqrt(static_cast<double>(hd));
        }
        double mx = logits[0];
        for (double l : logits) mx = l > mx ? l : mx;
        double z = 0.0;
        for (double& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t j = 0; j < key.size(); ++j)
          for (std::size_t r = 0; r < hd; ++r) {
            double v = 0.0;
            for (std::size_t c = 0; c < d; ++c) v += H.value[r * d + c] * value[j][c];
            concat[h * hd + r] += logits[j] / z * v;
          }
      }
      for (std::size_t r = 0; r < d; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += layer.output[r * d + c] * concat[c];
        next[i][r] = s;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace oracle
