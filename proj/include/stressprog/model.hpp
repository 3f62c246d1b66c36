#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stressprog/vad.hpp"

namespace stressprog {

enum class Architecture { Recurrent, Transformer };

std::string_view architecture_name(Architecture arch);
// Accepts "lstm" / "recurrent" and "transformer".
Architecture parse_architecture(std::string_view name);

struct ModelShape {
  Architecture arch = Architecture::Recurrent;
  int input_dim = 40;
  int hidden = 128;
  int heads = 4;           // transformer self-attention heads
  int layers = 2;          // transformer speech encoder depth
  int context_layers = 1;  // transformer context encoder depth
  int ff_dim = 256;
  double dropout = 0.3;
  bool positional_encoding = true;

  void validate() const;
};

// Every tensor is a dense matrix; bias and gain vectors are single columns.
using Tensor = Eigen::MatrixXd;

struct LinearParams {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1
};

// Gate blocks are stacked input, forget, cell, output.
struct LstmParams {
  Tensor w_in;   // 4H x in
  Tensor w_rec;  // 4H x H
  Tensor bias;   // 4H x 1
};

struct LayerNormParams {
  Tensor gain;   // H x 1
  Tensor shift;  // H x 1
};

// Single-head scaled dot-product attention with a residual connection on
// the query side.
struct CrossAttentionParams {
  LinearParams query;
  LinearParams key;
  LinearParams value;
};

struct SelfAttentionParams {
  LinearParams query;
  LinearParams key;
  LinearParams value;
  LinearParams output;
};

// Pre-norm transformer encoder layer with a GELU feed-forward block.
struct EncoderLayerParams {
  LayerNormParams norm1;
  SelfAttentionParams attention;
  LayerNormParams norm2;
  LinearParams ff_in;
  LinearParams ff_out;
};

struct TransformerEncoderParams {
  LinearParams input;
  std::vector<EncoderLayerParams> layers;
  LayerNormParams final_norm;
};

// All trainable tensors of either architecture. Members that the selected
// architecture does not use stay empty and are skipped by visit().
struct ModelParams {
  ModelShape shape;

  // Recurrent variant.
  LstmParams speech_lstm;
  LstmParams context_lstm;
  CrossAttentionParams context_to_speech;  // context queries over speech states

  // Transformer variant.
  TransformerEncoderParams speech_encoder;
  TransformerEncoderParams context_encoder;

  // Both variants.
  CrossAttentionParams speech_to_context;  // speech queries over context states
  LinearParams classifier;

  // Calls f(name, tensor) for every tensor in a fixed order.
  template <class F>
  void visit(F&& f);
  template <class F>
  void visit(F&& f) const;

  std::size_t parameter_count() const;
  bool all_finite() const;

  // Same shapes, all zeros.
  ModelParams zeros_like() const;

  static ModelParams zeros(const ModelShape& shape);
  // Glorot-uniform weights, zero biases, unit layer-norm gains, forget-gate
  // bias 1.
  static ModelParams initialize(const ModelShape& shape, std::uint64_t seed);
};

// Length-n context: s_default followed by the n-1 preceding stress codes.
class ContextSequence {
 public:
  // `codes` must start with (0,0,0). Throws std::invalid_argument otherwise.
  explicit ContextSequence(std::vector<VadCode> codes);

  // s_default followed by `previous` (oldest first).
  static ContextSequence from_previous(std::span<const VadCode> previous);

  const std::vector<VadCode>& codes() const { return codes_; }
  std::size_t size() const { return codes_.size(); }

  // 3 x n matrix of 0/1 values.
  Eigen::MatrixXd as_matrix() const;

  bool operator==(const ContextSequence&) const = default;

 private:
  std::vector<VadCode> codes_;
};

struct Prediction {
  Eigen::Vector3d probs = Eigen::Vector3d::Constant(0.5);
  VadCode code;
  bool stress = false;

  // Strict > 0.5 per dimension; stress iff the code equals (0,1,0).
  static Prediction from_probs(const Eigen::Vector3d& probs);
};

// Dropout is active only when a mask seed is supplied.
struct ForwardOptions {
  std::optional<std::uint64_t> dropout_seed;
};

// ---- Building blocks (exposed for testing and reuse) ----

// One hidden state per column; zero initial state.
Eigen::MatrixXd recurrent_encode(const Eigen::MatrixXd& inputs, const LstmParams& params);

// Softmax attention weights, rows = primary positions, cols = context
// positions.
Eigen::MatrixXd cross_attention_weights(const Eigen::MatrixXd& primary, const Eigen::MatrixXd& context,
                                        const CrossAttentionParams& params);

// primary + value(context) * weights^T.
Eigen::MatrixXd cross_attention(const Eigen::MatrixXd& primary, const Eigen::MatrixXd& context,
                                const CrossAttentionParams& params);

// hidden x length sinusoidal position table.
Eigen::MatrixXd positional_encoding(int hidden, int length);

Eigen::MatrixXd transformer_encode(const Eigen::MatrixXd& inputs, const TransformerEncoderParams& params,
                                   int heads, bool positional);

// ---- Whole model ----

// Inputs are d x n (one column per window, oldest first). Throws
// std::invalid_argument on n == 0, length or dimension mismatch.
Eigen::Vector3d forward_logits(const ModelParams& params, const Eigen::MatrixXd& features,
                               const ContextSequence& context, const ForwardOptions& options = {});

Prediction forward(const ModelParams& params, const Eigen::MatrixXd& features,
                   const ContextSequence& context);

struct SampleGradient {
  Eigen::Vector3d probs;
  double loss = 0.0;
};

// Forward + reverse pass for one sample: adds weight * d(loss)/d(params) to
// `grad` and returns the sample's BCE total.
SampleGradient accumulate_gradient(const ModelParams& params, const Eigen::MatrixXd& features,
                                   const ContextSequence& context, const VadCode& target, double weight,
                                   ModelParams& grad, const ForwardOptions& options = {});

// ---- template definitions ----

namespace detail {

template <class P, class F>
void visit_linear(P& p, const std::string& name, F& f) {
  f(name + ".weight", p.weight);
  f(name + ".bias", p.bias);
}

template <class P, class F>
void visit_norm(P& p, const std::string& name, F& f) {
  f(name + ".gain", p.gain);
  f(name + ".shift", p.shift);
}

template <class P, class F>
void visit_cross(P& p, const std::string& name, F& f) {
  visit_linear(p.query, name + ".query", f);
  visit_linear(p.key, name + ".key", f);
  visit_linear(p.value, name + ".value", f);
}

template <class P, class F>
void visit_encoder(P& p, const std::string& name, F& f) {
  visit_linear(p.input, name + ".input", f);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& layer = p.layers[i];
    const std::string prefix = name + ".layer" + std::to_string(i);
    visit_norm(layer.norm1, prefix + ".norm1", f);
    visit_linear(layer.attention.query, prefix + ".attention.query", f);
    visit_linear(layer.attention.key, prefix + ".attention.key", f);
    visit_linear(layer.attention.value, prefix + ".attention.value", f);
    visit_linear(layer.attention.output, prefix + ".attention.output", f);
    visit_norm(layer.norm2, prefix + ".norm2", f);
    visit_linear(layer.ff_in, prefix + ".ff_in", f);
    visit_linear(layer.ff_out, prefix + ".ff_out", f);
  }
  visit_norm(p.final_norm, name + ".final_norm", f);
}

template <class M, class F>
void visit_model(M& m, F& f) {
  if (m.shape.arch == Architecture::Recurrent) {
    f(std::string("speech_lstm.w_in"), m.speech_lstm.w_in);
    f(std::string("speech_lstm.w_rec"), m.speech_lstm.w_rec);
    f(std::string("speech_lstm.bias"), m.speech_lstm.bias);
    f(std::string("context_lstm.w_in"), m.context_lstm.w_in);
    f(std::string("context_lstm.w_rec"), m.context_lstm.w_rec);
    f(std::string("context_lstm.bias"), m.context_lstm.bias);
    visit_cross(m.speech_to_context, "speech_to_context", f);
    visit_cross(m.context_to_speech, "context_to_speech", f);
  } else {
    visit_encoder(m.speech_encoder, "speech_encoder", f);
    visit_encoder(m.context_encoder, "context_encoder", f);
    visit_cross(m.speech_to_context, "speech_to_context", f);
  }
  visit_linear(m.classifier, "classifier", f);
}

}  // namespace detail

template <class F>
void ModelParams::visit(F&& f) {
  detail::visit_model(*this, f);
}

template <class F>
void ModelParams::visit(F&& f) const {
  detail::visit_model(*this, f);
}

}  // namespace stressprog
