#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "lyricgan/nn/tensor.hpp"

// Layer kernels as forward/backward pairs. Backward functions accumulate into
// Parameter::grad and return the gradient with respect to the layer input.

namespace lyricgan::nn {

// ---- affine ---------------------------------------------------------------

/// out[i,k] = sum_d x[i,d] * W[d,k] + b[k]; x is B x D, W is D x K, b is K.
Tensor affine(const Tensor& x, const Parameter& weight, const Parameter& bias);
Tensor affine_backward(const Tensor& x, Parameter& weight, Parameter& bias, const Tensor& dout);

// ---- softmax family ---------------------------------------------------------

/// Row-wise log-softmax of a B x V tensor, stabilized by max subtraction.
Tensor log_softmax(const Tensor& x);
/// Gradient through log_softmax given its output.
Tensor log_softmax_backward(const Tensor& log_probs, const Tensor& dout);

double sigmoid(double z);
/// Binary cross-entropy on a logit, computed without overflow.
double bce_with_logit(double logit, double label);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dout);

// ---- embeddings -------------------------------------------------------------

/// Gathers rows of a V x E table; returns ids.size() x E.
Tensor embedding_lookup(const Parameter& table, std::span<const int> ids);
void embedding_backward(Parameter& table, std::span<const int> ids, const Tensor& dout);

// ---- LSTM ---------------------------------------------------------------------

/// Gate blocks are stacked input, forget, cell candidate, output (rows of the weights).
struct LstmCell {
  LstmCell() = default;
  LstmCell(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter w_input;   // 4H x D
  Parameter w_hidden;  // 4H x H
  Parameter bias;      // 4H
};

struct LstmState {
  Tensor h;
  Tensor c;
};

struct LstmStepCache {
  Tensor x;
  Tensor h_prev;
  Tensor c_prev;
  Tensor gates;  // activated gates B x 4H
  Tensor c;
  Tensor tanh_c;
};

/// One LSTM step; when `cache` is non-null it receives what backward needs.
LstmState lstm_step(const LstmCell& cell, const Tensor& x, const Tensor& h, const Tensor& c,
                    LstmStepCache* cache = nullptr);

struct LstmStepGrads {
  Tensor dx;
  Tensor dh_prev;
  Tensor dc_prev;
};

LstmStepGrads lstm_step_backward(LstmCell& cell, const LstmStepCache& cache, const Tensor& dh,
                                 const Tensor& dc);

// ---- convolution --------------------------------------------------------------

struct ConvBank {
  ConvBank() = default;
  ConvBank(std::size_t width, std::size_t input_dim, std::size_t feature_maps);

  std::size_t width = 0;
  Parameter filter;  // width x D x F
  Parameter bias;    // F
};

struct ConvCache {
  Tensor x;
  std::vector<std::vector<std::size_t>> argmax;  // per bank, B x F time offsets
};

/// Valid 1-D convolution over time for each bank followed by max-over-time,
/// concatenated along features. x is B x T x D; output is B x sum(F).
Tensor conv1d_maxpool(const Tensor& x, const std::vector<ConvBank>& banks,
                      ConvCache* cache = nullptr);
Tensor conv1d_maxpool_backward(std::vector<ConvBank>& banks, const ConvCache& cache,
                               const Tensor& dout);

// ---- dropout --------------------------------------------------------------------

/// Inverted dropout mask: entries are 0 or 1/(1-rate).
Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, std::mt19937_64& rng);
Tensor hadamard(const Tensor& a, const Tensor& b);

// ---- parameter utilities -------------------------------------------------------

double global_grad_norm(std::span<Parameter* const> params);
/// Rescales all gradients so their global norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);
void zero_grads(std::span<Parameter* const> params);
bool grads_finite(std::span<Parameter* const> params);

}  // namespace lyricgan::nn
