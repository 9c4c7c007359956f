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

#include "fspell/model.hpp"

#include <algorithm>
#include <cmath>

namespace fspell {

using nn::ConstMatrixMap;
using nn::MatrixMap;

void ModelConfig::validate() const {
  if (d_f < 1 || d < 2 || n_layers < 1 || n_heads < 1 || ffn_dim < 1 || max_T < 1 || c_sym < 1)
    throw ConfigError("model config has a non-positive dimension");
  if (d % n_heads != 0) throw ConfigError("hidden size d must be divisible by n_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

ParamLayout::ParamLayout(const ModelConfig& c) {
  c.validate();
  auto add = [this](std::string name, int rows, int cols) {
    tensors.push_back({std::move(name), rows, cols, total});
    total += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    return static_cast<int>(tensors.size()) - 1;
  };
  auto linear = [&](const std::string& name, int in, int out) {
    LinearSlots s;
    s.weight = add(name + ".weight", out, in);
    s.bias = add(name + ".bias", 1, out);
    return s;
  };
  auto norm = [&](const std::string& name, int dim) {
    LayerNormSlots s;
    s.gain = add(name + ".gain", 1, dim);
    s.bias = add(name + ".bias", 1, dim);
    return s;
  };

  proj_in = linear("proj.in", c.d_f, c.d);
  proj_out = linear("proj.out", c.d, c.d);
  cls_token = add("cls.token", 1, c.d);
  for (int i = 0; i < c.n_layers; ++i) {
    const std::string p = "layer" + std::to_string(i);
    EncoderLayerSlots l;
    l.ln_attn = norm(p + ".ln_attn", c.d);
    l.q = linear(p + ".q", c.d, c.d);
    l.k = linear(p + ".k", c.d, c.d);
    l.v = linear(p + ".v", c.d, c.d);
    l.o = linear(p + ".o", c.d, c.d);
    l.ln_ffn = norm(p + ".ln_ffn", c.d);
    l.ffn_in = linear(p + ".ffn_in", c.d, c.ffn_dim);
    l.ffn_out = linear(p + ".ffn_out", c.ffn_dim, c.d);
    layers.push_back(l);
  }
  final_norm = norm("final.norm", c.d);
  head_cls = {linear("head_cls.hidden", c.d, c.d), linear("head_cls.out", c.d, 1)};
  head_loc = {linear("head_loc.hidden", c.d, c.d), linear("head_loc.out", c.d, 1)};
  head_rec = {linear("head_rec.hidden", c.d, c.d), linear("head_rec.out", c.d, c.num_classes())};
}

std::vector<std::string> ParamLayout::groups() const {
  std::vector<std::string> out;
  for (const auto& t : tensors) {
    auto g = t.group();
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

ModelParams::ModelParams(const ModelConfig& config)
    : config_(config),
      layout_(std::make_shared<const ParamLayout>(config)),
      values_(layout_->total, 0.0),
      pos_enc_(nn::sinusoidal_positions(config.max_T, config.d)) {}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.layout_->tensors.size(); ++i) {
    const auto& spec = p.layout_->tensors[i];
    auto m = p.view(static_cast<int>(i));
    const std::string tail = spec.name.substr(spec.name.rfind('.') + 1);
    if (tail == "weight") {
      const double limit = std::sqrt(6.0 / (spec.rows + spec.cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
    } else if (tail == "gain") {
      m.setOnes();
    } else if (tail == "token") {
      std::normal_distribution<double> n(0.0, 0.02);
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
    }
  }
  return p;
}

MatrixMap ModelParams::view(int slot) {
  const auto& t = layout_->tensors.at(static_cast<std::size_t>(slot));
  return MatrixMap(values_.data() + t.offset, t.rows, t.cols);
}

ConstMatrixMap ModelParams::view(int slot) const {
  const auto& t = layout_->tensors.at(static_cast<std::size_t>(slot));
  return ConstMatrixMap(values_.data() + t.offset, t.rows, t.cols);
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z(*this);
  std::fill(z.values_.begin(), z.values_.end(), 0.0);
  return z;
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

struct LayerTrace {
  nn::LayerNormCache ln_attn;
  Matrix ln_attn_out;
  nn::AttentionCache attn;
  Matrix attn_mask;
  Matrix ln_ffn_in;
  nn::LayerNormCache ln_ffn;
  Matrix ln_ffn_out;
  Matrix ffn_hidden_pre;
  Matrix ffn_hidden;
  Matrix ffn_mask;
};

struct HeadTrace {
  Matrix input, hidden_pre, hidden;
};

struct Trace {
  Matrix input;
  Matrix proj_pre, proj_hidden;
  std::vector<LayerTrace> layers;
  Matrix encoded_pre_norm;
  nn::LayerNormCache final_norm;
  Matrix encoded;
  HeadTrace cls, loc, rec;
};

nn::AttentionWeights attention_weights(const ModelParams& p, const EncoderLayerSlots& l) {
  return {p.view(l.q.weight), p.view(l.q.bias), p.view(l.k.weight), p.view(l.k.bias),
          p.view(l.v.weight), p.view(l.v.bias), p.view(l.o.weight), p.view(l.o.bias)};
}

nn::AttentionGrads attention_grads(ModelParams& g, const EncoderLayerSlots& l) {
  return {g.view(l.q.weight), g.view(l.q.bias), g.view(l.k.weight), g.view(l.k.bias),
          g.view(l.v.weight), g.view(l.v.bias), g.view(l.o.weight), g.view(l.o.bias)};
}

Matrix head_forward(const ModelParams& p, const HeadSlots& h, const Matrix& x, HeadTrace& trace) {
  trace.input = x;
  trace.hidden_pre = nn::linear(x, p.view(h.hidden.weight), p.view(h.hidden.bias));
  trace.hidden = nn::gelu(trace.hidden_pre);
  return nn::linear(trace.hidden, p.view(h.out.weight), p.view(h.out.bias));
}

Matrix head_backward(const ModelParams& p, const HeadSlots& h, const Matrix& dy, const HeadTrace& trace,
                     ModelParams& g) {
  Matrix dh = nn::linear_backward(dy, trace.hidden, p.view(h.out.weight), g.view(h.out.weight), g.view(h.out.bias));
  dh = nn::gelu_backward(dh, trace.hidden_pre);
  return nn::linear_backward(dh, trace.input, p.view(h.hidden.weight), g.view(h.hidden.weight),
                             g.view(h.hidden.bias));
}

ForwardOutput run_forward(const ModelParams& params, const FeatureSequence& features, const ForwardOptions& options,
                          Trace& tr) {
  const auto& cfg = params.config();
  const auto& L = params.layout();
  const int steps = features.steps();
  if (features.dim() != cfg.d_f)
    throw ShapeError("feature dim " + std::to_string(features.dim()) + " does not match model d_f " +
                     std::to_string(cfg.d_f));
  if (steps < 1) throw ShapeError("empty feature sequence");
  if (steps > cfg.max_T)
    throw ShapeError("clip of " + std::to_string(steps) + " steps exceeds max_T " + std::to_string(cfg.max_T));

  const double rate = options.dropout_rng ? cfg.dropout : 0.0;
  tr.input = features.data.cast<double>();
  tr.proj_pre = nn::linear(tr.input, params.view(L.proj_in.weight), params.view(L.proj_in.bias));
  tr.proj_hidden = nn::gelu(tr.proj_pre);
  Matrix embedded = nn::linear(tr.proj_hidden, params.view(L.proj_out.weight), params.view(L.proj_out.bias));
  if (options.positional_encoding) embedded += params.positional_encoding().topRows(steps);

  Matrix z(steps + 1, cfg.d);
  z.row(0) = params.view(L.cls_token).row(0);
  z.bottomRows(steps) = embedded;

  tr.layers.assign(L.layers.size(), LayerTrace{});
  for (std::size_t i = 0; i < L.layers.size(); ++i) {
    const auto& ls = L.layers[i];
    auto& lt = tr.layers[i];
    lt.ln_attn_out = nn::layer_norm(z, params.view(ls.ln_attn.gain), params.view(ls.ln_attn.bias), lt.ln_attn);
    Matrix attn = nn::self_attention(lt.ln_attn_out, attention_weights(params, ls), cfg.n_heads, lt.attn);
    z += nn::dropout(attn, rate, options.dropout_rng, lt.attn_mask);
    lt.ln_ffn_in = z;
    lt.ln_ffn_out = nn::layer_norm(z, params.view(ls.ln_ffn.gain), params.view(ls.ln_ffn.bias), lt.ln_ffn);
    lt.ffn_hidden_pre = nn::linear(lt.ln_ffn_out, params.view(ls.ffn_in.weight), params.view(ls.ffn_in.bias));
    lt.ffn_hidden = nn::gelu(lt.ffn_hidden_pre);
    Matrix ffn = nn::linear(lt.ffn_hidden, params.view(ls.ffn_out.weight), params.view(ls.ffn_out.bias));
    z += nn::dropout(ffn, rate, options.dropout_rng, lt.ffn_mask);
  }
  tr.encoded_pre_norm = z;
  tr.encoded = nn::layer_norm(z, params.view(L.final_norm.gain), params.view(L.final_norm.bias), tr.final_norm);

  ForwardOutput out;
  out.cls_logit = head_forward(params, L.head_cls, tr.encoded.topRows(1), tr.cls)(0, 0);
  Matrix frames = tr.encoded.bottomRows(steps);
  out.loc_logits = head_forward(params, L.head_loc, frames, tr.loc).col(0);
  out.rec_logits = head_forward(params, L.head_rec, frames, tr.rec);

  out.cls_prob = nn::sigmoid(out.cls_logit);
  out.loc_probs = out.loc_logits.unaryExpr([](double v) { return nn::sigmoid(v); });
  out.rec_logprobs = log_softmax_rows(out.rec_logits);
  return out;
}

void run_backward(const ModelParams& params, const Trace& tr, double dcls, const Vector& dloc, const Matrix& drec,
                  ModelParams& g) {
  const auto& cfg = params.config();
  const auto& L = params.layout();
  const auto steps = static_cast<Eigen::Index>(dloc.size());

  Matrix dencoded = Matrix::Zero(steps + 1, cfg.d);
  Matrix dc(1, 1);
  dc(0, 0) = dcls;
  dencoded.topRows(1) += head_backward(params, L.head_cls, dc, tr.cls, g);
  dencoded.bottomRows(steps) += head_backward(params, L.head_loc, dloc, tr.loc, g);
  dencoded.bottomRows(steps) += head_backward(params, L.head_rec, drec, tr.rec, g);

  Matrix dz = nn::layer_norm_backward(dencoded, tr.final_norm, params.view(L.final_norm.gain),
                                      g.view(L.final_norm.gain), g.view(L.final_norm.bias));

  for (std::size_t ii = L.layers.size(); ii-- > 0;) {
    const auto& ls = L.layers[ii];
    const auto& lt = tr.layers[ii];
    // z2 = z1 + dropout(ffn(ln(z1)))
    Matrix dffn = nn::dropout_backward(dz, lt.ffn_mask);
    Matrix dh = nn::linear_backward(dffn, lt.ffn_hidden, params.view(ls.ffn_out.weight), g.view(ls.ffn_out.weight),
                                    g.view(ls.ffn_out.bias));
    dh = nn::gelu_backward(dh, lt.ffn_hidden_pre);
    Matrix dln = nn::linear_backward(dh, lt.ln_ffn_out, params.view(ls.ffn_in.weight), g.view(ls.ffn_in.weight),
                                     g.view(ls.ffn_in.bias));
    dz += nn::layer_norm_backward(dln, lt.ln_ffn, params.view(ls.ln_ffn.gain), g.view(ls.ln_ffn.gain),
                                  g.view(ls.ln_ffn.bias));
    // z1 = z0 + dropout(attn(ln(z0)))
    Matrix dattn = nn::dropout_backward(dz, lt.attn_mask);
    Matrix dln_a = nn::self_attention_backward(dattn, attention_weights(params, ls), cfg.n_heads, lt.attn,
                                               attention_grads(g, ls));
    dz += nn::layer_norm_backward(dln_a, lt.ln_attn, params.view(ls.ln_attn.gain), g.view(ls.ln_attn.gain),
                                  g.view(ls.ln_attn.bias));
  }

  g.view(L.cls_token).row(0) += dz.row(0);
  Matrix dembedded = dz.bottomRows(steps);
  Matrix dhidden = nn::linear_backward(dembedded, tr.proj_hidden, params.view(L.proj_out.weight),
                                       g.view(L.proj_out.weight), g.view(L.proj_out.bias));
  dhidden = nn::gelu_backward(dhidden, tr.proj_pre);
  nn::linear_backward(dhidden, tr.input, params.view(L.proj_in.weight), g.view(L.proj_in.weight),
                      g.view(L.proj_in.bias));
}

struct LossWithGrads {
  LossBreakdown loss;
  double dcls = 0.0;
  Vector dloc;
  Matrix drec;
};

LossWithGrads compute_loss(const ForwardOutput& out, const ClipSample& sample, RecLossMode mode, bool with_grad) {
  const auto steps = out.loc_logits.size();
  if (sample.y_loc.size() != static_cast<std::size_t>(steps))
    throw ShapeError("y_loc length does not match the model output length");
  LossWithGrads r;
  const double y = sample.y_cls ? 1.0 : 0.0;
  r.loss.cls = nn::bce_with_logit(y, out.cls_logit);
  r.dcls = out.cls_prob - y;

  r.dloc = Vector::Zero(steps);
  if (sample.y_cls) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < steps; ++t) {
      const double yt = sample.y_loc[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
      acc += nn::bce_with_logit(yt, out.loc_logits(t));
      r.dloc(t) = (out.loc_probs(t) - yt) / static_cast<double>(steps);
    }
    r.loss.loc = acc / static_cast<double>(steps);
  }

  r.drec = Matrix::Zero(out.rec_logits.rows(), out.rec_logits.cols());
  if (sample.y_cls) {
    std::optional<CtcResult> rec;
    if (mode == RecLossMode::mh_ctc && sample.hypotheses && !sample.hypotheses->empty()) {
      auto mh = mh_ctc_loss(out.rec_logprobs, *sample.hypotheses, with_grad);
      r.loss.argmin = mh.argmin;
      rec = std::move(mh.result);
    } else if (sample.target) {
      rec = ctc_loss(out.rec_logprobs, *sample.target, with_grad);
    }
    if (rec) {
      r.loss.lambda = 1.0;
      r.loss.rec = rec->loss;
      if (with_grad) r.drec = std::move(*rec->grad);
    }
  }
  r.loss.total = r.loss.cls + r.loss.loc + r.loss.lambda * r.loss.rec;
  return r;
}

}  // namespace

ForwardOutput forward(const ModelParams& params, const FeatureSequence& features, const ForwardOptions& options) {
  Trace tr;
  return run_forward(params, features, options, tr);
}

LossBreakdown total_loss(const ForwardOutput& output, const ClipSample& sample, RecLossMode mode) {
  return compute_loss(output, sample, mode, false).loss;
}

LossBreakdown loss_and_gradient(const ModelParams& params, const ClipSample& sample, RecLossMode mode,
                                ModelParams& grads, double scale, const ForwardOptions& options) {
  Trace tr;
  ForwardOutput out = run_forward(params, sample.features, options, tr);
  LossWithGrads lg = compute_loss(out, sample, mode, true);
  run_backward(params, tr, scale * lg.dcls, scale * lg.dloc, scale * lg.loss.lambda * lg.drec, grads);
  return lg.loss;
}

}  // namespace fspell
