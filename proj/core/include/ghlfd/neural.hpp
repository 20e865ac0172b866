#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ghlfd/matrix.hpp"
#include "ghlfd/timeseries.hpp"

namespace ghlfd {

// Weights of one LSTM layer. Rows of W, U and b are grouped in four blocks
// of `hidden` rows in gate order input, forget, cell candidate, output.
struct LstmLayerParams {
  LstmLayerParams() = default;
  LstmLayerParams(std::size_t input_size, std::size_t hidden_size)
      : W(4 * hidden_size, input_size), U(4 * hidden_size, hidden_size), b(4 * hidden_size, 0.0) {}

  std::size_t input_size() const noexcept { return W.cols(); }
  std::size_t hidden_size() const noexcept { return U.cols(); }

  Matrix W;               // 4h x d
  Matrix U;               // 4h x h
  std::vector<double> b;  // 4h
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

// One LSTM time step:
//   i, f, o = sigmoid(.), g = tanh(.) of W x + U h + b
//   c' = f * c + i * g,  h' = o * tanh(c')
CellState lstm_step(const LstmLayerParams& params, std::span<const double> x, std::span<const double> h,
                    std::span<const double> c);

// All trainable tensors of the stacked network. Also used as the gradient
// and optimizer-accumulator container since the shapes are identical.
struct ModelParams {
  LstmLayerParams layer1;
  LstmLayerParams layer2;
  Matrix output_W;               // m x h2
  std::vector<double> output_b;  // m

  static constexpr std::size_t kTensorCount = 8;
  static const std::array<const char*, kTensorCount>& tensor_names();

  // Flat views in the order W1, U1, b1, W2, U2, b2, Wo, bo.
  std::array<std::span<double>, kTensorCount> tensors();
  std::array<std::span<const double>, kTensorCount> tensors() const;

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
};

// Forward cache of one training pass; consumed by LstmModel::backward.
class ForwardTape {
 public:
  bool empty() const noexcept { return steps_ == 0; }
  std::size_t steps() const noexcept { return steps_; }

 private:
  friend class LstmModel;

  struct LayerTape {
    Matrix inputs;   // w x d (layer input per step)
    Matrix h_prev;   // w x h
    Matrix c_prev;   // w x h
    Matrix gates;    // w x 4h, post-activation
    Matrix c;        // w x h
    Matrix tanh_c;   // w x h
    Matrix h;        // w x h
  };

  std::size_t steps_ = 0;
  std::size_t tbptt_length_ = 0;
  std::uint64_t param_version_ = 0;
  const void* owner_ = nullptr;
  LayerTape layer1_;
  LayerTape layer2_;
  Matrix dropout_mask_;  // w x h1, entries 0 or 1/(1-p); empty when p = 0
};

// Two stacked LSTM layers followed by a linear read-out. The network is
// stateful: hidden and cell state persist across forward calls until
// reset_state().
class LstmModel {
 public:
  LstmModel() = default;
  LstmModel(std::size_t channels, std::size_t hidden1, std::size_t hidden2, double dropout_p);

  std::size_t channels() const noexcept { return params_.output_b.size(); }
  std::size_t hidden1() const noexcept { return params_.layer1.hidden_size(); }
  std::size_t hidden2() const noexcept { return params_.layer2.hidden_size(); }
  double dropout_p() const noexcept { return dropout_p_; }
  void set_dropout_p(double p);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except
  // forget gates at 1. Resets state.
  void initialize(std::uint64_t seed);

  const ModelParams& params() const noexcept { return params_; }
  // Mutable access invalidates outstanding tapes.
  ModelParams& mutable_params() noexcept {
    ++version_;
    return params_;
  }

  void reset_state();
  const std::array<CellState, 2>& state() const noexcept { return state_; }
  void set_state(const std::array<CellState, 2>& state);

  // Inference pass over a w x m input; row t of the result is the forecast
  // paired with input row t. Advances the persistent state.
  Matrix forward(const Matrix& input);

  // Training pass with dropout between the layers; records `tape`.
  // `tbptt_length` = 0 means the whole input.
  Matrix forward_train(const Matrix& input, ForwardTape& tape, std::mt19937_64& dropout_rng,
                       std::size_t tbptt_length = 0);

  // Gradients of the loss w.r.t. every parameter given dLoss/dPrediction.
  // Gradient flow stops at the start of the taped window and at every
  // tbptt_length boundary inside it.
  ModelParams backward(const ForwardTape& tape, const Matrix& pred_grad) const;

 private:
  Matrix run(const Matrix& input, ForwardTape* tape, std::mt19937_64* rng, std::size_t tbptt_length);

  ModelParams params_;
  std::array<CellState, 2> state_;
  double dropout_p_ = 0.0;
  std::uint64_t version_ = 1;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // dLoss/dPrediction
};

// Mean over all w*m entries of (pred - target)^2.
LossResult mse_loss(const Matrix& pred, const Matrix& target);

struct TrainConfig {
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  int epochs = 100;
  std::size_t tbptt_length = 0;  // 0: one batch
  double gradient_clip_norm = 5.0;
  std::uint64_t seed = 0;
  double dropout_p = 0.5;
  double early_stop_delta = 1e-6;
  int early_stop_patience = 10;

  void validate() const;
};

// Scales `grads` in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(ModelParams& grads, double max_norm);

class RmsProp {
 public:
  RmsProp(const ModelParams& shape, double learning_rate, double decay, double epsilon);

  // v <- decay * v + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(v) + eps)
  void step(ModelParams& params, const ModelParams& grads);

  const ModelParams& accumulator() const noexcept { return accum_; }

 private:
  ModelParams accum_;
  double lr_, decay_, eps_;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  bool early_stopped = false;
};

// Fits `model` on consecutive batch pairs (X^(i) -> X^(i+1)) of a
// normalized series. State is reset at each epoch start and carried across
// batches. One RMSprop update per batch pair.
TrainResult train(LstmModel& model, const TimeSeries& normalized, std::size_t w, const TrainConfig& config);

}  // namespace ghlfd
