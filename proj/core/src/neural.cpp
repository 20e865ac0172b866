#include "ghlfd/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "ghlfd/errors.hpp"
#include "ghlfd/rng.hpp"

namespace ghlfd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

ConstMapMat view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
MapMat view(Matrix& m) { return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())}; }
ConstMapVec view(std::span<const double> v) { return {v.data(), static_cast<Eigen::Index>(v.size())}; }
MapVec view(std::span<double> v) { return {v.data(), static_cast<Eigen::Index>(v.size())}; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Destinations for one layer's forward cache.
struct LayerTapeRefs {
  Matrix *inputs, *h_prev, *c_prev, *gates, *c, *tanh_c, *h;
};

// Runs one layer over all rows of `x`, starting from and updating `state`.
// Fills `tape` when given; always writes layer outputs into `out_h`.
void layer_forward(const LstmLayerParams& p, const Matrix& x, CellState& state, Matrix& out_h,
                   const LayerTapeRefs* tape) {
  const std::size_t steps = x.rows();
  const std::size_t hs = p.hidden_size();

  // Input contribution for every step at once: pre = X W^T + b.
  Matrix pre(steps, 4 * hs);
  view(pre).noalias() = view(x) * view(p.W).transpose();
  view(pre).rowwise() += view(std::span<const double>(p.b)).transpose();

  out_h = Matrix(steps, hs);
  Eigen::VectorXd hv = view(std::span<const double>(state.h));
  Eigen::VectorXd cv = view(std::span<const double>(state.c));
  Eigen::VectorXd rec(4 * hs);
  const auto U = view(p.U);
  for (std::size_t t = 0; t < steps; ++t) {
    if (tape) {
      view(tape->h_prev->row(t)) = hv;
      view(tape->c_prev->row(t)) = cv;
    }
    rec.noalias() = U * hv;
    auto a = pre.row(t);
    for (std::size_t k = 0; k < hs; ++k) {
      const double ig = sigmoid(a[k] + rec[k]);
      const double fg = sigmoid(a[hs + k] + rec[hs + k]);
      const double gg = std::tanh(a[2 * hs + k] + rec[2 * hs + k]);
      const double og = sigmoid(a[3 * hs + k] + rec[3 * hs + k]);
      const double cn = fg * cv[k] + ig * gg;
      const double tc = std::tanh(cn);
      cv[k] = cn;
      hv[k] = og * tc;
      if (tape) {
        auto g = tape->gates->row(t);
        g[k] = ig;
        g[hs + k] = fg;
        g[2 * hs + k] = gg;
        g[3 * hs + k] = og;
        (*tape->c)(t, k) = cn;
        (*tape->tanh_c)(t, k) = tc;
      }
    }
    view(out_h.row(t)) = hv;
  }
  if (tape) {
    *tape->inputs = x;
    *tape->h = out_h;
  }
  view(std::span<double>(state.h)) = hv;
  view(std::span<double>(state.c)) = cv;
}

}  // namespace

CellState lstm_step(const LstmLayerParams& params, std::span<const double> x, std::span<const double> h,
                    std::span<const double> c) {
  if (x.size() != params.input_size() || h.size() != params.hidden_size() || c.size() != params.hidden_size()) {
    throw DataError("lstm_step: shape mismatch");
  }
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.data().begin());
  CellState st{{h.begin(), h.end()}, {c.begin(), c.end()}};
  Matrix out;
  layer_forward(params, in, st, out, nullptr);
  return st;
}

const std::array<const char*, ModelParams::kTensorCount>& ModelParams::tensor_names() {
  static const std::array<const char*, kTensorCount> names{"layer1.W", "layer1.U", "layer1.b", "layer2.W",
                                                           "layer2.U", "layer2.b", "output.W", "output.b"};
  return names;
}

std::array<std::span<double>, ModelParams::kTensorCount> ModelParams::tensors() {
  return {layer1.W.data(), layer1.U.data(), std::span<double>(layer1.b),
          layer2.W.data(), layer2.U.data(), std::span<double>(layer2.b),
          output_W.data(), std::span<double>(output_b)};
}

std::array<std::span<const double>, ModelParams::kTensorCount> ModelParams::tensors() const {
  return {layer1.W.data(), layer1.U.data(), std::span<const double>(layer1.b),
          layer2.W.data(), layer2.U.data(), std::span<const double>(layer2.b),
          output_W.data(), std::span<const double>(output_b)};
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.layer1 = LstmLayerParams(layer1.input_size(), layer1.hidden_size());
  z.layer2 = LstmLayerParams(layer2.input_size(), layer2.hidden_size());
  z.output_W = Matrix(output_W.rows(), output_W.cols());
  z.output_b.assign(output_b.size(), 0.0);
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

LstmModel::LstmModel(std::size_t channels, std::size_t hidden1, std::size_t hidden2, double dropout_p) {
  if (channels == 0 || hidden1 == 0 || hidden2 == 0) throw ConfigError("LstmModel: sizes must be positive");
  set_dropout_p(dropout_p);
  params_.layer1 = LstmLayerParams(channels, hidden1);
  params_.layer2 = LstmLayerParams(hidden1, hidden2);
  params_.output_W = Matrix(channels, hidden2);
  params_.output_b.assign(channels, 0.0);
  reset_state();
}

void LstmModel::set_dropout_p(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
  dropout_p_ = p;
}

void LstmModel::initialize(std::uint64_t seed) {
  auto gen = make_stream(seed, "init");
  auto fill = [&](std::span<double> t, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (auto& v : t) v = bound * (2.0 * uniform01(gen) - 1.0);
  };
  auto& p = mutable_params();
  for (auto* layer : {&p.layer1, &p.layer2}) {
    fill(layer->W.data(), static_cast<double>(layer->input_size()));
    fill(layer->U.data(), static_cast<double>(layer->hidden_size()));
    const std::size_t hs = layer->hidden_size();
    std::fill(layer->b.begin(), layer->b.end(), 0.0);
    std::fill(layer->b.begin() + static_cast<std::ptrdiff_t>(hs), layer->b.begin() + static_cast<std::ptrdiff_t>(2 * hs),
              1.0);
  }
  fill(p.output_W.data(), static_cast<double>(p.output_W.cols()));
  std::fill(p.output_b.begin(), p.output_b.end(), 0.0);
  reset_state();
}

void LstmModel::reset_state() {
  state_[0] = CellState{std::vector<double>(hidden1(), 0.0), std::vector<double>(hidden1(), 0.0)};
  state_[1] = CellState{std::vector<double>(hidden2(), 0.0), std::vector<double>(hidden2(), 0.0)};
}

void LstmModel::set_state(const std::array<CellState, 2>& state) {
  if (state[0].h.size() != hidden1() || state[0].c.size() != hidden1() || state[1].h.size() != hidden2() ||
      state[1].c.size() != hidden2()) {
    throw DataError("LstmModel::set_state: state does not match layer widths");
  }
  state_ = state;
}

Matrix LstmModel::forward(const Matrix& input) { return run(input, nullptr, nullptr, 0); }

Matrix LstmModel::forward_train(const Matrix& input, ForwardTape& tape, std::mt19937_64& dropout_rng,
                                std::size_t tbptt_length) {
  return run(input, &tape, &dropout_rng, tbptt_length);
}

Matrix LstmModel::run(const Matrix& input, ForwardTape* tape, std::mt19937_64* rng, std::size_t tbptt_length) {
  if (input.cols() != channels()) {
    throw DataError("LstmModel::forward: input has " + std::to_string(input.cols()) + " channels, model expects " +
                    std::to_string(channels()));
  }
  const std::size_t steps = input.rows();

  LayerTapeRefs refs1{}, refs2{};
  if (tape) {
    tape->steps_ = steps;
    tape->tbptt_length_ = tbptt_length == 0 ? steps : tbptt_length;
    tape->param_version_ = version_;
    tape->owner_ = this;
    auto prepare = [steps](ForwardTape::LayerTape& lt, std::size_t hs, LayerTapeRefs& r) {
      lt.h_prev = Matrix(steps, hs);
      lt.c_prev = Matrix(steps, hs);
      lt.gates = Matrix(steps, 4 * hs);
      lt.c = Matrix(steps, hs);
      lt.tanh_c = Matrix(steps, hs);
      r = {&lt.inputs, &lt.h_prev, &lt.c_prev, &lt.gates, &lt.c, &lt.tanh_c, &lt.h};
    };
    prepare(tape->layer1_, hidden1(), refs1);
    prepare(tape->layer2_, hidden2(), refs2);
  }

  Matrix h1;
  layer_forward(params_.layer1, input, state_[0], h1, tape ? &refs1 : nullptr);

  // Inverted dropout between the stacked layers, training passes only.
  if (tape) {
    tape->dropout_mask_ = Matrix();
    if (dropout_p_ > 0.0) {
      tape->dropout_mask_ = Matrix(steps, hidden1());
      const double keep_scale = 1.0 / (1.0 - dropout_p_);
      for (auto& v : tape->dropout_mask_.data()) v = uniform01(*rng) >= dropout_p_ ? keep_scale : 0.0;
      view(h1).array() *= view(tape->dropout_mask_).array();
    }
  }

  Matrix h2;
  layer_forward(params_.layer2, h1, state_[1], h2, tape ? &refs2 : nullptr);

  Matrix out(steps, channels());
  view(out).noalias() = view(h2) * view(params_.output_W).transpose();
  view(out).rowwise() += view(std::span<const double>(params_.output_b)).transpose();
  return out;
}

namespace {

// Backpropagates through one taped layer. `dh_out` is dLoss/dh_t from the
// layer above; accumulates parameter gradients into `g` and returns
// dLoss/dx_t for the layer below.
Matrix layer_backward(const LstmLayerParams& p, const Matrix& inputs,
                      const Matrix& h_prev, const Matrix& c_prev, const Matrix& gates, const Matrix& tanh_c,
                      const Matrix& dh_out, std::size_t tbptt_length, LstmLayerParams& g) {
  const std::size_t steps = inputs.rows();
  const std::size_t hs = p.hidden_size();
  Matrix dpre(steps, 4 * hs);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hs));
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hs));
  const auto U = view(p.U);

  for (std::size_t t = steps; t-- > 0;) {
    if ((t + 1) % tbptt_length == 0) {
      dh_next.setZero();
      dc_next.setZero();
    }
    const auto gt = gates.row(t);
    auto d = dpre.row(t);
    for (std::size_t k = 0; k < hs; ++k) {
      const double ig = gt[k], fg = gt[hs + k], gg = gt[2 * hs + k], og = gt[3 * hs + k];
      const double tc = tanh_c(t, k);
      const double dh = dh_out(t, k) + dh_next[static_cast<Eigen::Index>(k)];
      const double dc = dc_next[static_cast<Eigen::Index>(k)] + dh * og * (1.0 - tc * tc);
      d[k] = dc * gg * ig * (1.0 - ig);
      d[hs + k] = dc * c_prev(t, k) * fg * (1.0 - fg);
      d[2 * hs + k] = dc * ig * (1.0 - gg * gg);
      d[3 * hs + k] = dh * tc * og * (1.0 - og);
      dc_next[static_cast<Eigen::Index>(k)] = dc * fg;
    }
    dh_next.noalias() = U.transpose() * view(std::span<const double>(d));
  }

  const auto D = view(dpre);
  view(g.W).noalias() += D.transpose() * view(inputs);
  view(g.U).noalias() += D.transpose() * view(h_prev);
  view(std::span<double>(g.b)) += D.colwise().sum().transpose();
  Matrix dx(steps, p.input_size());
  view(dx).noalias() = D * view(p.W);
  return dx;
}

}  // namespace

ModelParams LstmModel::backward(const ForwardTape& tape, const Matrix& pred_grad) const {
  if (tape.empty() || tape.owner_ != this) throw DataError("LstmModel::backward: no forward tape for this model");
  if (tape.param_version_ != version_) throw DataError("LstmModel::backward: stale tape (parameters changed)");
  if (pred_grad.rows() != tape.steps_ || pred_grad.cols() != channels()) {
    throw DataError("LstmModel::backward: gradient shape does not match the taped forward pass");
  }
  ModelParams g = params_.zeros_like();
  const auto& t1 = tape.layer1_;
  const auto& t2 = tape.layer2_;

  const auto dY = view(pred_grad);
  view(g.output_W).noalias() = dY.transpose() * view(t2.h);
  view(std::span<double>(g.output_b)) = dY.colwise().sum().transpose();
  Matrix dh2(tape.steps_, hidden2());
  view(dh2).noalias() = dY * view(params_.output_W);

  Matrix dh1 = layer_backward(params_.layer2, t2.inputs, t2.h_prev, t2.c_prev, t2.gates, t2.tanh_c, dh2,
                              tape.tbptt_length_, g.layer2);
  if (!tape.dropout_mask_.empty()) view(dh1).array() *= view(tape.dropout_mask_).array();
  layer_backward(params_.layer1, t1.inputs, t1.h_prev, t1.c_prev, t1.gates, t1.tanh_c, dh1,
                 tape.tbptt_length_, g.layer1);
  return g;
}

LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw DataError("mse_loss: shape mismatch");
  LossResult r;
  r.grad = Matrix(pred.rows(), pred.cols());
  const auto n = static_cast<double>(pred.size());
  double sum = 0.0;
  const auto p = pred.data();
  const auto t = target.data();
  auto g = r.grad.data();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k] - t[k];
    sum += d * d;
    g[k] = 2.0 * d / n;
  }
  r.loss = sum / n;
  return r;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(rmsprop_decay > 0 && rmsprop_decay < 1)) throw ConfigError("rmsprop decay must lie in (0, 1)");
  if (!(rmsprop_epsilon > 0)) throw ConfigError("rmsprop epsilon must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(gradient_clip_norm > 0)) throw ConfigError("gradient_clip_norm must be > 0");
  if (!(dropout_p >= 0 && dropout_p < 1)) throw ConfigError("dropout probability must lie in [0, 1)");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
}

double clip_global_norm(ModelParams& grads, double max_norm) {
  double ss = 0.0;
  for (const auto& t : grads.tensors())
    for (double v : t) ss += v * v;
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto t : grads.tensors())
      for (auto& v : t) v *= scale;
  }
  return norm;
}

RmsProp::RmsProp(const ModelParams& shape, double learning_rate, double decay, double epsilon)
    : accum_(shape.zeros_like()), lr_(learning_rate), decay_(decay), eps_(epsilon) {}

void RmsProp::step(ModelParams& params, const ModelParams& grads) {
  auto ps = params.tensors();
  const auto gs = grads.tensors();
  auto vs = accum_.tensors();
  for (std::size_t k = 0; k < ModelParams::kTensorCount; ++k) {
    if (ps[k].size() != gs[k].size() || ps[k].size() != vs[k].size())
      throw DataError("RmsProp::step: tensor shape mismatch");
    for (std::size_t j = 0; j < ps[k].size(); ++j) {
      const double g = gs[k][j];
      vs[k][j] = decay_ * vs[k][j] + (1.0 - decay_) * g * g;
      ps[k][j] -= lr_ * g / (std::sqrt(vs[k][j]) + eps_);
    }
  }
}

TrainResult train(LstmModel& model, const TimeSeries& normalized, std::size_t w, const TrainConfig& config) {
  config.validate();
  if (w == 0) throw ConfigError("train: batch length must be >= 1");
  if (normalized.width() != model.channels()) {
    throw DataError("train: series has " + std::to_string(normalized.width()) + " channels, model expects " +
                    std::to_string(model.channels()));
  }
  if (normalized.length() < 2 * w) {
    throw DataError("train: series has " + std::to_string(normalized.length()) + " points, need at least 2w = " +
                    std::to_string(2 * w));
  }
  model.set_dropout_p(config.dropout_p);
  const auto batches = make_batches(normalized, w);
  auto dropout_rng = make_stream(config.seed, "dropout");
  RmsProp opt(model.params(), config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon);
  const std::size_t tbptt = config.tbptt_length == 0 ? w : config.tbptt_length;

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  ForwardTape tape;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    model.reset_state();
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < batches.size(); ++i) {
      const Matrix pred = model.forward_train(batches[i].values, tape, dropout_rng, tbptt);
      const LossResult loss = mse_loss(pred, batches[i + 1].values);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(i + 1));
      }
      ModelParams grads = model.backward(tape, loss.grad);
      clip_global_norm(grads, config.gradient_clip_norm);
      opt.step(model.mutable_params(), grads);
      total += loss.loss;
    }
    const double mean = total / static_cast<double>(batches.size() - 1);
    result.epoch_loss.push_back(mean);
    if (best - mean < config.early_stop_delta) {
      if (++stale >= config.early_stop_patience) {
        result.early_stopped = true;
        break;
      }
    } else {
      stale = 0;
    }
    best = std::min(best, mean);
  }
  model.reset_state();
  return result;
}

}  // namespace ghlfd
