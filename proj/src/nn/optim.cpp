#include "lyricgan/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lyricgan::nn {

void adam_step(Parameter& p, const AdamConfig& config, std::int64_t step) {
  if (step < 1) throw std::invalid_argument("adam step count must be >= 1");
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  double* value = p.value.data();
  const double* grad = p.grad.data();
  double* m = p.first_moment.data();
  double* v = p.second_moment.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad[i];
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adagrad_step(Parameter& p, const AdagradConfig& config) {
  double* value = p.value.data();
  const double* grad = p.grad.data();
  double* acc = p.second_moment.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad[i];
    acc[i] += g * g;
    if (g == 0.0) continue;
    value[i] -= config.learning_rate * g / (std::sqrt(acc[i]) + config.epsilon);
  }
}

void Adam::step(std::span<Parameter* const> params) {
  ++steps_;
  for (Parameter* p : params) adam_step(*p, config_, steps_);
}

void Adagrad::step(std::span<Parameter* const> params) {
  for (Parameter* p : params) adagrad_step(*p, config_);
}

double grad_check(const LossFn& loss, std::span<Parameter* const> params,
                  const GradCheckOptions& options) {
  const double base = loss(true);
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: loss is not finite");
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.samples_per_param > 0 && options.samples_per_param < coords.size()) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.samples_per_param);
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = loss(false);
      p.value[i] = saved - options.step;
      const double down = loss(false);
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::runtime_error("grad_check: perturbed loss is not finite at " + p.name);
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace lyricgan::nn
