#pragma once

// Straight-line reference implementations used only by tests. They share no
// code with the library kernels they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "qdf/tensor/tensor.hpp"

namespace qdf::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            DType dtype = DType::f64) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = dist(rng);
  return Tensor::from_values(std::move(shape), v, dtype);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Direct cross-correlation: out[b][f][y][x] = bias[f] + sum_{c,i,j} w[f][c][i][j] * xpad[b][c][y*s+i][x*s+j]
inline std::vector<double> naive_conv2d(const std::vector<double>& x, std::size_t B, std::size_t C,
                                        std::size_t H, std::size_t W, const std::vector<double>& w,
                                        std::size_t F, std::size_t KH, std::size_t KW,
                                        const std::vector<double>& bias, std::size_t stride,
                                        std::size_t pad, std::size_t& HO, std::size_t& WO) {
  HO = (H + 2 * pad - KH) / stride + 1;
  WO = (W + 2 * pad - KW) / stride + 1;
  std::vector<double> out(B * F * HO * WO, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t y = 0; y < HO; ++y)
        for (std::size_t xo = 0; xo < WO; ++xo) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(xo * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += w[((f * C + c) * KH + i) * KW + j] *
                       x[((b * C + c) * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
              }
          out[((b * F + f) * HO + y) * WO + xo] = acc + bias[f];
        }
  return out;
}

inline std::vector<double> naive_maxpool(const std::vector<double>& x, std::size_t planes,
                                         std::size_t H, std::size_t W, std::size_t k,
                                         std::size_t s, std::size_t& HO, std::size_t& WO) {
  HO = (H - k) / s + 1;
  WO = (W - k) / s + 1;
  std::vector<double> out;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < HO; ++y)
      for (std::size_t xo = 0; xo < WO; ++xo) {
        double m = -INFINITY;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) m = std::max(m, x[(p * H + y * s + i) * W + xo * s + j]);
        out.push_back(m);
      }
  return out;
}

/// softmax(Q K^T / sqrt(d)) V for row-major [B x T x d], [B x T2 x d], [B x T2 x d].
inline std::vector<double> naive_attention(const std::vector<double>& q, const std::vector<double>& k,
                                           const std::vector<double>& v, std::size_t B,
                                           std::size_t T, std::size_t T2, std::size_t d) {
  std::vector<double> out(B * T * d, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < T; ++i) {
      std::vector<double> score(T2);
      for (std::size_t j = 0; j < T2; ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < d; ++e) s += q[(b * T + i) * d + e] * k[(b * T2 + j) * d + e];
        score[j] = s / std::sqrt(static_cast<double>(d));
      }
      const double mx = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (auto& s : score) z += (s = std::exp(s - mx));
      for (std::size_t j = 0; j < T2; ++j)
        for (std::size_t e = 0; e < d; ++e)
          out[(b * T + i) * d + e] += score[j] / z * v[(b * T2 + j) * d + e];
    }
  return out;
}

/// Interval sampling by search: the i-th kept index is the largest j with
/// j * M <= i * N, found by scanning rather than by division.
inline std::vector<double> naive_interval_sample(const std::vector<double>& series, std::size_t M) {
  const std::size_t N = series.size();
  if (N <= M) return series;
  std::vector<double> out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < M; ++i) {
    while ((j + 1) * M <= i * N) ++j;
    out.push_back(series[j]);
  }
  return out;
}

}  // namespace qdf::testing
