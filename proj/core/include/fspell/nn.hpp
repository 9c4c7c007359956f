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

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "fspell/types.hpp"

// Dense layers with hand-written backward passes. Activations are row-major
// (rows = time steps). Weights follow the out x in convention; biases are
// 1 x out rows. Backward functions accumulate into the parameter gradients.
namespace fspell::nn {

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

Matrix linear(const Matrix& x, const ConstMatrixMap& weight, const ConstMatrixMap& bias);
// Returns dx.
Matrix linear_backward(const Matrix& dy, const Matrix& x, const ConstMatrixMap& weight, MatrixMap dweight,
                       MatrixMap dbias);

// Exact (erf) GELU.
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& dy, const Matrix& x);

struct LayerNormCache {
  Matrix normalized;
  Vector inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

Matrix layer_norm(const Matrix& x, const ConstMatrixMap& gain, const ConstMatrixMap& bias, LayerNormCache& cache);
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const ConstMatrixMap& gain,
                           MatrixMap dgain, MatrixMap dbias);

struct AttentionWeights {
  ConstMatrixMap wq, bq, wk, bk, wv, bv, wo, bo;
};

struct AttentionGrads {
  MatrixMap wq, bq, wk, bk, wv, bv, wo, bo;
};

struct AttentionCache {
  Matrix input, q, k, v, context;
  std::vector<Matrix> probs;  // one (n x n) matrix per head
};

Matrix self_attention(const Matrix& x, const AttentionWeights& w, int n_heads, AttentionCache& cache);
Matrix self_attention_backward(const Matrix& dy, const AttentionWeights& w, int n_heads, const AttentionCache& cache,
                               AttentionGrads g);

// Inverted dropout. An empty mask means dropout was inactive.
Matrix dropout(const Matrix& x, double rate, std::mt19937_64* rng, Matrix& mask);
Matrix dropout_backward(const Matrix& dy, const Matrix& mask);

Matrix sinusoidal_positions(int max_len, int dim);

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }
// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
// Binary cross-entropy of label y against sigmoid(logit).
inline double bce_with_logit(double y, double logit) { return softplus(logit) - y * logit; }

}  // namespace fspell::nn
