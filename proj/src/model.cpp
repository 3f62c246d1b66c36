#include "stressprog/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "stressprog/loss.hpp"

namespace stressprog {

std::string_view architecture_name(Architecture arch) {
  return arch == Architecture::Recurrent ? "lstm" : "transformer";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "lstm" || name == "recurrent") return Architecture::Recurrent;
  if (name == "transformer") return Architecture::Transformer;
  throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

void ModelShape::validate() const {
  if (input_dim <= 0 || hidden <= 0) throw std::invalid_argument("model dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
  if (arch == Architecture::Transformer) {
    if (heads <= 0 || hidden % heads != 0) throw std::invalid_argument("hidden must be divisible by heads");
    if (layers <= 0 || context_layers <= 0 || ff_dim <= 0) {
      throw std::invalid_argument("transformer depth and ff_dim must be positive");
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter allocation

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

LinearParams zero_linear(int out, int in) { return {MatrixXd::Zero(out, in), MatrixXd::Zero(out, 1)}; }

LstmParams zero_lstm(int in, int hidden) {
  return {MatrixXd::Zero(4 * hidden, in), MatrixXd::Zero(4 * hidden, hidden), MatrixXd::Zero(4 * hidden, 1)};
}

LayerNormParams zero_norm(int h) { return {MatrixXd::Zero(h, 1), MatrixXd::Zero(h, 1)}; }

CrossAttentionParams zero_cross(int h) { return {zero_linear(h, h), zero_linear(h, h), zero_linear(h, h)}; }

TransformerEncoderParams zero_encoder(int in, int layers, const ModelShape& s) {
  TransformerEncoderParams p;
  p.input = zero_linear(s.hidden, in);
  for (int i = 0; i < layers; ++i) {
    EncoderLayerParams layer;
    layer.norm1 = zero_norm(s.hidden);
    layer.attention = {zero_linear(s.hidden, s.hidden), zero_linear(s.hidden, s.hidden),
                       zero_linear(s.hidden, s.hidden), zero_linear(s.hidden, s.hidden)};
    layer.norm2 = zero_norm(s.hidden);
    layer.ff_in = zero_linear(s.ff_dim, s.hidden);
    layer.ff_out = zero_linear(s.hidden, s.ff_dim);
    p.layers.push_back(std::move(layer));
  }
  p.final_norm = zero_norm(s.hidden);
  return p;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelShape& shape) {
  shape.validate();
  ModelParams m;
  m.shape = shape;
  const int h = shape.hidden;
  if (shape.arch == Architecture::Recurrent) {
    m.speech_lstm = zero_lstm(shape.input_dim, h);
    m.context_lstm = zero_lstm(3, h);
    m.context_to_speech = zero_cross(h);
    m.classifier = zero_linear(3, 2 * h);
  } else {
    m.speech_encoder = zero_encoder(shape.input_dim, shape.layers, shape);
    m.context_encoder = zero_encoder(3, shape.context_layers, shape);
    m.classifier = zero_linear(3, h);
  }
  m.speech_to_context = zero_cross(h);
  return m;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  out.visit([](const std::string&, Tensor& t) { t.setZero(); });
  return out;
}

ModelParams ModelParams::initialize(const ModelShape& shape, std::uint64_t seed) {
  ModelParams m = zeros(shape);
  std::mt19937_64 rng(seed);
  const int h = shape.hidden;
  m.visit([&](const std::string& name, Tensor& t) {
    const auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".gain")) {
      t.setOnes();
    } else if (ends_with(".bias") || ends_with(".shift")) {
      t.setZero();
      if (name.find("lstm") != std::string::npos) t.block(h, 0, h, 1).setOnes();
    } else {
      // LSTM blocks are initialised per gate so the fan-out is H, not 4H.
      const double fan_out = name.find("lstm") != std::string::npos ? h : static_cast<double>(t.rows());
      const double limit = std::sqrt(6.0 / (static_cast<double>(t.cols()) + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    }
  });
  return m;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  visit([&](const std::string&, const Tensor& t) { count += static_cast<std::size_t>(t.size()); });
  return count;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const Tensor& t) { ok = ok && t.allFinite(); });
  return ok;
}

// ---------------------------------------------------------------------------
// Context and predictions

ContextSequence::ContextSequence(std::vector<VadCode> codes) : codes_(std::move(codes)) {
  if (codes_.empty()) throw std::invalid_argument("context sequence must not be empty");
  if (codes_.front() != kDefaultContext) throw std::invalid_argument("context must start with s_default (0,0,0)");
}

ContextSequence ContextSequence::from_previous(std::span<const VadCode> previous) {
  std::vector<VadCode> codes;
  codes.reserve(previous.size() + 1);
  codes.push_back(kDefaultContext);
  codes.insert(codes.end(), previous.begin(), previous.end());
  return ContextSequence(std::move(codes));
}

Eigen::MatrixXd ContextSequence::as_matrix() const {
  Eigen::MatrixXd m(3, static_cast<Eigen::Index>(codes_.size()));
  for (std::size_t t = 0; t < codes_.size(); ++t) {
    for (int i = 0; i < 3; ++i) m(i, static_cast<Eigen::Index>(t)) = codes_[t][static_cast<std::size_t>(i)];
  }
  return m;
}

Prediction Prediction::from_probs(const Eigen::Vector3d& probs) {
  Prediction p;
  p.probs = probs;
  p.code = VadCode(probs(0) > 0.5, probs(1) > 0.5, probs(2) > 0.5);
  p.stress = is_stress(p.code);
  return p;
}

// ---------------------------------------------------------------------------
// Layers with explicit reverse passes

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd linear_forward(const LinearParams& p, const MatrixXd& x) {
  MatrixXd y = p.weight * x;
  y.colwise() += p.bias.col(0);
  return y;
}

// Accumulates parameter gradients, returns d(input).
MatrixXd linear_backward(const LinearParams& p, const MatrixXd& x, const MatrixXd& dy, LinearParams& g) {
  g.weight.noalias() += dy * x.transpose();
  g.bias.col(0) += dy.rowwise().sum();
  return p.weight.transpose() * dy;
}

void check_input(const MatrixXd& x, Eigen::Index rows, const char* what) {
  if (x.cols() == 0) throw std::invalid_argument(std::string(what) + ": empty sequence");
  if (x.rows() != rows) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(rows) + ", got " +
                                std::to_string(x.rows()));
  }
}

// --- LSTM

struct LstmCache {
  MatrixXd x, in_gate, forget_gate, cell_gate, out_gate, cell, cell_tanh, hidden;
};

LstmCache lstm_forward(const LstmParams& p, const MatrixXd& x) {
  const Eigen::Index h = p.w_rec.cols();
  check_input(x, p.w_in.cols(), "recurrent encoder");
  const Eigen::Index steps = x.cols();
  LstmCache c;
  c.x = x;
  for (MatrixXd* m : {&c.in_gate, &c.forget_gate, &c.cell_gate, &c.out_gate, &c.cell, &c.cell_tanh, &c.hidden}) {
    m->resize(h, steps);
  }
  const MatrixXd input_part = p.w_in * x;
  VectorXd h_prev = VectorXd::Zero(h), c_prev = VectorXd::Zero(h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    VectorXd z = input_part.col(t) + p.w_rec * h_prev + p.bias.col(0);
    for (Eigen::Index j = 0; j < h; ++j) {
      const double ig = sigmoid(z(j));
      const double fg = sigmoid(z(h + j));
      const double gg = std::tanh(z(2 * h + j));
      const double og = sigmoid(z(3 * h + j));
      const double cell = fg * c_prev(j) + ig * gg;
      const double ct = std::tanh(cell);
      c.in_gate(j, t) = ig;
      c.forget_gate(j, t) = fg;
      c.cell_gate(j, t) = gg;
      c.out_gate(j, t) = og;
      c.cell(j, t) = cell;
      c.cell_tanh(j, t) = ct;
      c.hidden(j, t) = og * ct;
    }
    h_prev = c.hidden.col(t);
    c_prev = c.cell.col(t);
  }
  return c;
}

MatrixXd lstm_backward(const LstmParams& p, const LstmCache& c, const MatrixXd& d_hidden, LstmParams& g) {
  const Eigen::Index h = p.w_rec.cols();
  const Eigen::Index steps = c.x.cols();
  MatrixXd dz(4 * h, steps);
  VectorXd dh_next = VectorXd::Zero(h), dc_next = VectorXd::Zero(h);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const VectorXd dh = d_hidden.col(t) + dh_next;
    for (Eigen::Index j = 0; j < h; ++j) {
      const double ig = c.in_gate(j, t), fg = c.forget_gate(j, t), gg = c.cell_gate(j, t), og = c.out_gate(j, t);
      const double ct = c.cell_tanh(j, t);
      const double c_prev = t > 0 ? c.cell(j, t - 1) : 0.0;
      const double d_out = dh(j) * ct;
      const double dc = dh(j) * og * (1.0 - ct * ct) + dc_next(j);
      dz(j, t) = dc * gg * ig * (1.0 - ig);
      dz(h + j, t) = dc * c_prev * fg * (1.0 - fg);
      dz(2 * h + j, t) = dc * ig * (1.0 - gg * gg);
      dz(3 * h + j, t) = d_out * og * (1.0 - og);
      dc_next(j) = dc * fg;
    }
    dh_next = p.w_rec.transpose() * dz.col(t);
    if (t > 0) g.w_rec.noalias() += dz.col(t) * c.hidden.col(t - 1).transpose();
  }
  g.w_in.noalias() += dz * c.x.transpose();
  g.bias.col(0) += dz.rowwise().sum();
  return p.w_in.transpose() * dz;
}

// --- softmax attention shared by cross and self attention

// Row-wise softmax of scores.
MatrixXd softmax_rows(const MatrixXd& scores) {
  MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double peak = scores.row(i).maxCoeff();
    out.row(i) = (scores.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

MatrixXd softmax_rows_backward(const MatrixXd& weights, const MatrixXd& d_weights) {
  const VectorXd inner = (weights.array() * d_weights.array()).rowwise().sum();
  return (weights.array() * (d_weights.colwise() - inner).array()).matrix();
}

// --- cross attention

struct CrossCache {
  MatrixXd primary, context, q, k, v, weights;
};

CrossCache cross_forward(const CrossAttentionParams& p, const MatrixXd& primary, const MatrixXd& context,
                         MatrixXd& out) {
  const Eigen::Index h = p.query.weight.cols();
  check_input(primary, h, "cross attention (primary)");
  check_input(context, h, "cross attention (context)");
  CrossCache c;
  c.primary = primary;
  c.context = context;
  c.q = linear_forward(p.query, primary);
  c.k = linear_forward(p.key, context);
  c.v = linear_forward(p.value, context);
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.rows()));
  c.weights = softmax_rows((c.q.transpose() * c.k) * scale);
  out = primary + c.v * c.weights.transpose();
  return c;
}

// Returns {d_primary, d_context}.
std::pair<MatrixXd, MatrixXd> cross_backward(const CrossAttentionParams& p, const CrossCache& c, const MatrixXd& d_out,
                                             CrossAttentionParams& g) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.rows()));
  const MatrixXd dv = d_out * c.weights;
  const MatrixXd dw = d_out.transpose() * c.v;
  const MatrixXd ds = softmax_rows_backward(c.weights, dw) * scale;
  const MatrixXd dq = c.k * ds.transpose();
  const MatrixXd dk = c.q * ds;
  MatrixXd d_primary = d_out + linear_backward(p.query, c.primary, dq, g.query);
  MatrixXd d_context = linear_backward(p.key, c.context, dk, g.key) + linear_backward(p.value, c.context, dv, g.value);
  return {std::move(d_primary), std::move(d_context)};
}

// --- multi-head self attention

struct SelfCache {
  MatrixXd input, q, k, v, concat;
  std::vector<MatrixXd> weights;
};

MatrixXd self_forward(const SelfAttentionParams& p, const MatrixXd& x, int heads, SelfCache& c) {
  c.input = x;
  c.q = linear_forward(p.query, x);
  c.k = linear_forward(p.key, x);
  c.v = linear_forward(p.value, x);
  const Eigen::Index dk = c.q.rows() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  c.concat.resize(c.q.rows(), x.cols());
  c.weights.clear();
  for (int head = 0; head < heads; ++head) {
    const Eigen::Index r = head * dk;
    MatrixXd w = softmax_rows((c.q.middleRows(r, dk).transpose() * c.k.middleRows(r, dk)) * scale);
    c.concat.middleRows(r, dk) = c.v.middleRows(r, dk) * w.transpose();
    c.weights.push_back(std::move(w));
  }
  return linear_forward(p.output, c.concat);
}

MatrixXd self_backward(const SelfAttentionParams& p, const SelfCache& c, const MatrixXd& d_out, int heads,
                       SelfAttentionParams& g) {
  const MatrixXd d_concat = linear_backward(p.output, c.concat, d_out, g.output);
  const Eigen::Index dk = c.q.rows() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  MatrixXd dq(c.q.rows(), c.q.cols()), dk_all(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (int head = 0; head < heads; ++head) {
    const Eigen::Index r = head * dk;
    const MatrixXd& w = c.weights[static_cast<std::size_t>(head)];
    const auto d_head = d_concat.middleRows(r, dk);
    dv.middleRows(r, dk) = d_head * w;
    const MatrixXd dw = d_head.transpose() * c.v.middleRows(r, dk);
    const MatrixXd ds = softmax_rows_backward(w, dw) * scale;
    dq.middleRows(r, dk) = c.k.middleRows(r, dk) * ds.transpose();
    dk_all.middleRows(r, dk) = c.q.middleRows(r, dk) * ds;
  }
  return linear_backward(p.query, c.input, dq, g.query) + linear_backward(p.key, c.input, dk_all, g.key) +
         linear_backward(p.value, c.input, dv, g.value);
}

// --- layer norm (per column)

constexpr double kNormEps = 1e-5;

struct NormCache {
  MatrixXd normalized;
  Eigen::RowVectorXd inv_std;
};

MatrixXd norm_forward(const LayerNormParams& p, const MatrixXd& x, NormCache& c) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  c.inv_std = (var.array() + kNormEps).rsqrt();
  c.normalized = centered.array().rowwise() * c.inv_std.array();
  MatrixXd y = c.normalized.array().colwise() * p.gain.col(0).array();
  y.colwise() += p.shift.col(0);
  return y;
}

MatrixXd norm_backward(const LayerNormParams& p, const NormCache& c, const MatrixXd& dy, LayerNormParams& g) {
  g.gain.col(0) += (dy.array() * c.normalized.array()).rowwise().sum().matrix();
  g.shift.col(0) += dy.rowwise().sum();
  const MatrixXd dn = dy.array().colwise() * p.gain.col(0).array();
  const Eigen::RowVectorXd mean_dn = dn.colwise().mean();
  const Eigen::RowVectorXd mean_dn_n = (dn.array() * c.normalized.array()).colwise().mean();
  MatrixXd dx = dn.rowwise() - mean_dn;
  dx -= (c.normalized.array().rowwise() * mean_dn_n.array()).matrix();
  return dx.array().rowwise() * c.inv_std.array();
}

// --- GELU (tanh approximation)

constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluK * (x + kGeluC * x * x * x))); }

double gelu_derivative(double x) {
  const double th = std::tanh(kGeluK * (x + kGeluC * x * x * x));
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluK * (1.0 + 3.0 * kGeluC * x * x);
}

// --- encoder layer and stack

struct LayerCache {
  NormCache norm1, norm2;
  SelfCache attention;
  MatrixXd normed2, pre_act, act;
};

MatrixXd layer_forward(const EncoderLayerParams& p, const MatrixXd& x, int heads, LayerCache& c) {
  const MatrixXd a = norm_forward(p.norm1, x, c.norm1);
  const MatrixXd x1 = x + self_forward(p.attention, a, heads, c.attention);
  c.normed2 = norm_forward(p.norm2, x1, c.norm2);
  c.pre_act = linear_forward(p.ff_in, c.normed2);
  c.act = c.pre_act.unaryExpr([](double v) { return gelu(v); });
  return x1 + linear_forward(p.ff_out, c.act);
}

MatrixXd layer_backward(const EncoderLayerParams& p, const LayerCache& c, const MatrixXd& dy, int heads,
                        EncoderLayerParams& g) {
  const MatrixXd d_act = linear_backward(p.ff_out, c.act, dy, g.ff_out);
  const MatrixXd d_pre = d_act.cwiseProduct(c.pre_act.unaryExpr([](double v) { return gelu_derivative(v); }));
  const MatrixXd d_normed2 = linear_backward(p.ff_in, c.normed2, d_pre, g.ff_in);
  const MatrixXd dx1 = dy + norm_backward(p.norm2, c.norm2, d_normed2, g.norm2);
  const MatrixXd da = self_backward(p.attention, c.attention, dx1, heads, g.attention);
  return dx1 + norm_backward(p.norm1, c.norm1, da, g.norm1);
}

struct EncoderCache {
  MatrixXd input;
  std::vector<LayerCache> layers;
  NormCache final_norm;
};

MatrixXd encoder_forward(const TransformerEncoderParams& p, const MatrixXd& x, int heads, bool positional,
                         EncoderCache& c) {
  check_input(x, p.input.weight.cols(), "transformer encoder");
  c.input = x;
  MatrixXd e = linear_forward(p.input, x);
  if (positional) e += positional_encoding(static_cast<int>(e.rows()), static_cast<int>(e.cols()));
  c.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) e = layer_forward(p.layers[i], e, heads, c.layers[i]);
  return norm_forward(p.final_norm, e, c.final_norm);
}

MatrixXd encoder_backward(const TransformerEncoderParams& p, const EncoderCache& c, const MatrixXd& dy, int heads,
                          TransformerEncoderParams& g) {
  MatrixXd de = norm_backward(p.final_norm, c.final_norm, dy, g.final_norm);
  for (std::size_t i = p.layers.size(); i-- > 0;) de = layer_backward(p.layers[i], c.layers[i], de, heads, g.layers[i]);
  return linear_backward(p.input, c.input, de, g.input);
}

// --- dropout

MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  MatrixXd mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return mask;
}

// --- whole model

struct ModelTrace {
  LstmCache speech_lstm, context_lstm;
  EncoderCache speech_encoder, context_encoder;
  MatrixXd speech_mask, context_mask;
  CrossCache speech_cross, context_cross;
  VectorXd fused;
  Eigen::Vector3d logits;
};

void check_sample(const ModelParams& params, const MatrixXd& features, const ContextSequence& context) {
  if (features.cols() == 0) throw std::invalid_argument("forward: sequence length must be >= 1");
  if (static_cast<std::size_t>(features.cols()) != context.size()) {
    throw std::invalid_argument("forward: feature length " + std::to_string(features.cols()) +
                                " != context length " + std::to_string(context.size()));
  }
  if (features.rows() != params.shape.input_dim) {
    throw std::invalid_argument("forward: feature dimension " + std::to_string(features.rows()) + " != model input " +
                                std::to_string(params.shape.input_dim));
  }
}

void run_forward(const ModelParams& params, const MatrixXd& features, const ContextSequence& context,
                 const ForwardOptions& options, ModelTrace& trace) {
  check_sample(params, features, context);
  const ModelShape& s = params.shape;
  const MatrixXd codes = context.as_matrix();
  MatrixXd speech, ctx;
  if (s.arch == Architecture::Recurrent) {
    trace.speech_lstm = lstm_forward(params.speech_lstm, features);
    trace.context_lstm = lstm_forward(params.context_lstm, codes);
    speech = trace.speech_lstm.hidden;
    ctx = trace.context_lstm.hidden;
  } else {
    speech = encoder_forward(params.speech_encoder, features, s.heads, s.positional_encoding, trace.speech_encoder);
    ctx = encoder_forward(params.context_encoder, codes, s.heads, s.positional_encoding, trace.context_encoder);
  }
  if (options.dropout_seed && s.dropout > 0.0) {
    std::mt19937_64 rng(*options.dropout_seed);
    trace.speech_mask = dropout_mask(speech.rows(), speech.cols(), s.dropout, rng);
    trace.context_mask = dropout_mask(ctx.rows(), ctx.cols(), s.dropout, rng);
    speech = speech.cwiseProduct(trace.speech_mask);
    ctx = ctx.cwiseProduct(trace.context_mask);
  } else {
    trace.speech_mask.resize(0, 0);
    trace.context_mask.resize(0, 0);
  }
  const Eigen::Index last = features.cols() - 1;
  MatrixXd attended;
  trace.speech_cross = cross_forward(params.speech_to_context, speech, ctx, attended);
  if (s.arch == Architecture::Recurrent) {
    MatrixXd reverse;
    trace.context_cross = cross_forward(params.context_to_speech, ctx, speech, reverse);
    trace.fused.resize(2 * s.hidden);
    trace.fused << attended.col(last), reverse.col(last);
  } else {
    trace.fused = attended.col(last);
  }
  trace.logits = linear_forward(params.classifier, trace.fused);
}

void run_backward(const ModelParams& params, const ModelTrace& trace, const Eigen::Vector3d& d_logits,
                  ModelParams& grad) {
  const ModelShape& s = params.shape;
  const VectorXd d_fused = linear_backward(params.classifier, trace.fused, d_logits, grad.classifier);
  const Eigen::Index steps = trace.speech_cross.primary.cols();
  const Eigen::Index h = s.hidden;

  MatrixXd d_attended = MatrixXd::Zero(h, steps);
  d_attended.col(steps - 1) = d_fused.head(h);
  auto [d_speech, d_ctx] = cross_backward(params.speech_to_context, trace.speech_cross, d_attended,
                                          grad.speech_to_context);
  if (s.arch == Architecture::Recurrent) {
    MatrixXd d_reverse = MatrixXd::Zero(h, steps);
    d_reverse.col(steps - 1) = d_fused.tail(h);
    auto [d_ctx2, d_speech2] = cross_backward(params.context_to_speech, trace.context_cross, d_reverse,
                                              grad.context_to_speech);
    d_speech += d_speech2;
    d_ctx += d_ctx2;
  }
  if (trace.speech_mask.size() > 0) {
    d_speech = d_speech.cwiseProduct(trace.speech_mask);
    d_ctx = d_ctx.cwiseProduct(trace.context_mask);
  }
  if (s.arch == Architecture::Recurrent) {
    lstm_backward(params.speech_lstm, trace.speech_lstm, d_speech, grad.speech_lstm);
    lstm_backward(params.context_lstm, trace.context_lstm, d_ctx, grad.context_lstm);
  } else {
    encoder_backward(params.speech_encoder, trace.speech_encoder, d_speech, s.heads, grad.speech_encoder);
    encoder_backward(params.context_encoder, trace.context_encoder, d_ctx, s.heads, grad.context_encoder);
  }
}

Eigen::Vector3d sigmoid3(const Eigen::Vector3d& logits) {
  return logits.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

Eigen::MatrixXd recurrent_encode(const Eigen::MatrixXd& inputs, const LstmParams& params) {
  return lstm_forward(params, inputs).hidden;
}

Eigen::MatrixXd cross_attention_weights(const Eigen::MatrixXd& primary, const Eigen::MatrixXd& context,
                                        const CrossAttentionParams& params) {
  MatrixXd out;
  return cross_forward(params, primary, context, out).weights;
}

Eigen::MatrixXd cross_attention(const Eigen::MatrixXd& primary, const Eigen::MatrixXd& context,
                                const CrossAttentionParams& params) {
  MatrixXd out;
  cross_forward(params, primary, context, out);
  return out;
}

Eigen::MatrixXd positional_encoding(int hidden, int length) {
  MatrixXd pe(hidden, length);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < hidden; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / hidden);
      pe(i, pos) = i % 2 == 0 ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  }
  return pe;
}

Eigen::MatrixXd transformer_encode(const Eigen::MatrixXd& inputs, const TransformerEncoderParams& params, int heads,
                                   bool positional) {
  EncoderCache cache;
  return encoder_forward(params, inputs, heads, positional, cache);
}

Eigen::Vector3d forward_logits(const ModelParams& params, const Eigen::MatrixXd& features,
                               const ContextSequence& context, const ForwardOptions& options) {
  ModelTrace trace;
  run_forward(params, features, context, options, trace);
  return trace.logits;
}

Prediction forward(const ModelParams& params, const Eigen::MatrixXd& features, const ContextSequence& context) {
  return Prediction::from_probs(sigmoid3(forward_logits(params, features, context)));
}

SampleGradient accumulate_gradient(const ModelParams& params, const Eigen::MatrixXd& features,
                                   const ContextSequence& context, const VadCode& target, double weight,
                                   ModelParams& grad, const ForwardOptions& options) {
  ModelTrace trace;
  run_forward(params, features, context, options, trace);
  SampleGradient out;
  out.probs = sigmoid3(trace.logits);
  out.loss = bce_loss(out.probs, target).total;
  run_backward(params, trace, weight * bce_logit_gradient(out.probs, target), grad);
  return out;
}

}  // namespace stressprog
