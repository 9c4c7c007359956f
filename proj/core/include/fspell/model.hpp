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

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fspell/ctc.hpp"
#include "fspell/nn.hpp"
#include "fspell/types.hpp"

namespace fspell {

struct ModelConfig {
  int d_f = 40;
  int d = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ffn_dim = 128;
  int max_T = 64;
  double dropout = 0.1;
  int c_sym = 26;

  int num_classes() const { return c_sym + 1; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Indices into ParamLayout::tensors.
struct LinearSlots {
  int weight = -1;
  int bias = -1;
};
struct LayerNormSlots {
  int gain = -1;
  int bias = -1;
};
struct EncoderLayerSlots {
  LayerNormSlots ln_attn;
  LinearSlots q, k, v, o;
  LayerNormSlots ln_ffn;
  LinearSlots ffn_in, ffn_out;
};
struct HeadSlots {
  LinearSlots hidden, out;
};

struct TensorSpec {
  std::string name;  // "<group>.<tensor>", e.g. "layer0.q.weight"
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::string group() const { return name.substr(0, name.find('.')); }
};

/// Where every tensor of the network lives inside one flat parameter array.
struct ParamLayout {
  std::vector<TensorSpec> tensors;
  std::size_t total = 0;

  LinearSlots proj_in, proj_out;
  int cls_token = -1;
  std::vector<EncoderLayerSlots> layers;
  LayerNormSlots final_norm;
  HeadSlots head_cls, head_loc, head_rec;

  explicit ParamLayout(const ModelConfig& config);
  std::vector<std::string> groups() const;
};

/// All trainable weights in one flat array plus the fixed sinusoidal table.
class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& config);  // all zeros

  /// Xavier-uniform weights, zero biases, unit norm gains, small random [CLS].
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return *layout_; }
  const Matrix& positional_encoding() const { return pos_enc_; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  nn::MatrixMap view(int slot);
  nn::ConstMatrixMap view(int slot) const;

  ModelParams zeros_like() const;
  bool all_finite() const;

 private:
  ModelConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> values_;
  Matrix pos_enc_;
};

struct ForwardOutput {
  double cls_prob = 0.0;
  Vector loc_probs;         // T
  LogProbFrame rec_logprobs;  // T x (C_sym + 1)

  // Pre-activation values; losses are computed from these for stability.
  double cls_logit = 0.0;
  Vector loc_logits;
  Matrix rec_logits;
};

struct ForwardOptions {
  bool positional_encoding = true;
  // Non-null enables dropout (training mode).
  std::mt19937_64* dropout_rng = nullptr;
};

ForwardOutput forward(const ModelParams& params, const FeatureSequence& features, const ForwardOptions& options = {});

enum class RecLossMode { ctc, mh_ctc };

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double loc = 0.0;
  double rec = 0.0;
  double lambda = 0.0;
  std::optional<std::size_t> argmin;  // MH-CTC: chosen hypothesis
};

/// L = L_cls + L_loc + lambda * L_rec. L_loc carries the y_cls factor, lambda is 1
/// iff the sample has a word target (ctc) or hypotheses/target (mh_ctc).
/// Throws InfeasibleTarget / NoFeasibleHypothesis for unusable targets.
LossBreakdown total_loss(const ForwardOutput& output, const ClipSample& sample, RecLossMode mode);

/// Forward + loss + backward for one clip. Parameter gradients are scaled by
/// `scale` and accumulated into `grads`.
LossBreakdown loss_and_gradient(const ModelParams& params, const ClipSample& sample, RecLossMode mode,
                                ModelParams& grads, double scale = 1.0, const ForwardOptions& options = {});

}  // namespace fspell
