// Copyright 2026 The fspell Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fspell/nn.hpp"

#include <cmath>

namespace fspell::nn {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Matrix linear(const Matrix& x, const ConstMatrixMap& weight, const ConstMatrixMap& bias) {
  Matrix y = x * weight.transpose();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix linear_backward(const Matrix& dy, const Matrix& x, const ConstMatrixMap& weight, MatrixMap dweight,
                       MatrixMap dbias) {
  dweight.noalias() += dy.transpose() * x;
  dbias.row(0) += dy.colwise().sum();
  return dy * weight;
}

Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Matrix gelu_backward(const Matrix& dy, const Matrix& x) {
  Matrix d = x.unaryExpr([](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return cdf + v * pdf;
  });
  return dy.cwiseProduct(d);
}

Matrix layer_norm(const Matrix& x, const ConstMatrixMap& gain, const ConstMatrixMap& bias, LayerNormCache& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.normalized.resize(n, d);
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(i) = inv;
    cache.normalized.row(i) = (x.row(i).array() - mean) * inv;
  }
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const ConstMatrixMap& gain,
                           MatrixMap dgain, MatrixMap dbias) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  dgain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd g = dy.row(i).array() * gain.row(0).array();
    const double mean_g = g.mean();
    const double mean_gx = (g.array() * cache.normalized.row(i).array()).mean();
    dx.row(i) = cache.inv_std(i) * (g.array() - mean_g - cache.normalized.row(i).array() * mean_gx);
  }
  return dx;
}

Matrix self_attention(const Matrix& x, const AttentionWeights& w, int n_heads, AttentionCache& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.input = x;
  cache.q = linear(x, w.wq, w.bq);
  cache.k = linear(x, w.wk, w.bk);
  cache.v = linear(x, w.wv, w.bv);
  cache.context.resize(n, d);
  cache.probs.resize(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = h * dh;
    Matrix scores = cache.q.middleCols(c0, dh) * cache.k.middleCols(c0, dh).transpose() * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - m).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    cache.context.middleCols(c0, dh) = scores * cache.v.middleCols(c0, dh);
    cache.probs[static_cast<std::size_t>(h)] = std::move(scores);
  }
  return linear(cache.context, w.wo, w.bo);
}

Matrix self_attention_backward(const Matrix& dy, const AttentionWeights& w, int n_heads, const AttentionCache& cache,
                               AttentionGrads g) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dcontext = linear_backward(dy, cache.context, w.wo, g.wo, g.bo);
  Matrix dq(n, d), dk(n, d), dv(n, d);
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = h * dh;
    const Matrix& p = cache.probs[static_cast<std::size_t>(h)];
    Matrix dctx = dcontext.middleCols(c0, dh);
    Matrix dp = dctx * cache.v.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh) = p.transpose() * dctx;
    Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
    Matrix ds = p.array() * (dp.colwise() - row_dot).array();
    dq.middleCols(c0, dh) = ds * cache.k.middleCols(c0, dh) * scale;
    dk.middleCols(c0, dh) = ds.transpose() * cache.q.middleCols(c0, dh) * scale;
  }
  Matrix dx = linear_backward(dq, cache.input, w.wq, g.wq, g.bq);
  dx += linear_backward(dk, cache.input, w.wk, g.wk, g.bk);
  dx += linear_backward(dv, cache.input, w.wv, g.wv, g.bv);
  return dx;
}

Matrix dropout(const Matrix& x, double rate, std::mt19937_64* rng, Matrix& mask) {
  if (rng == nullptr || rate <= 0.0) {
    mask.resize(0, 0);
    return x;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  mask.resize(x.rows(), x.cols());
  const double inv = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) mask(i, j) = keep(*rng) ? inv : 0.0;
  return x.cwiseProduct(mask);
}

Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

Matrix sinusoidal_positions(int max_len, int dim) {
  Matrix pe(max_len, dim);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe(pos, i) = std::sin(pos * freq);
      if (i + 1 < dim) pe(pos, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

}  // namespace fspell::nn
