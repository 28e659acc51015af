#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include "lyricgan/nn/tensor.hpp"

namespace lyricgan::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdagradConfig {
  double learning_rate = 1e-2;
  double epsilon = 1e-10;
};

/// Bias-corrected Adam update of one parameter; `step` counts from 1.
void adam_step(Parameter& p, const AdamConfig& config, std::int64_t step);

/// Adagrad: accumulates squared gradients, scales by lr / (sqrt(acc) + eps).
void adagrad_step(Parameter& p, const AdagradConfig& config);

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(std::span<Parameter* const> params);
  std::int64_t steps_taken() const { return steps_; }
  void set_steps_taken(std::int64_t n) { steps_ = n; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
};

class Adagrad {
 public:
  explicit Adagrad(AdagradConfig config = {}) : config_(config) {}
  void step(std::span<Parameter* const> params);
  const AdagradConfig& config() const { return config_; }

 private:
  AdagradConfig config_;
};

// ---- gradient checking ------------------------------------------------------

/// Loss closure. With `with_grad` set it must zero and then fill Parameter::grad.
using LossFn = std::function<double(bool with_grad)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t samples_per_param = 0;
  std::uint64_t seed = 0;
};

/// Max over checked coordinates of |analytic - numeric| / max(1, |analytic| + |numeric|),
/// with numeric gradients from central differences. Throws on a non-finite loss.
double grad_check(const LossFn& loss, std::span<Parameter* const> params,
                  const GradCheckOptions& options = {});

}  // namespace lyricgan::nn
