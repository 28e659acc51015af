#include "lyricgan/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lyricgan::nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                ", got shape " + t.shape_string());
  }
}

using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

}  // namespace

Tensor affine(const Tensor& x, const Parameter& weight, const Parameter& bias) {
  require_rank(x, 2, "affine input");
  require_rank(weight.value, 2, "affine weight");
  if (x.dim(1) != weight.value.dim(0)) {
    throw std::invalid_argument("affine: input " + x.shape_string() + " does not conform to weight " +
                                weight.value.shape_string());
  }
  require_shape(bias.value, {weight.value.dim(1)}, "affine bias");
  Tensor out({x.dim(0), weight.value.dim(1)});
  auto o = out.as_matrix();
  o.noalias() = x.as_matrix() * weight.value.as_matrix();
  o.rowwise() += bias.value.as_matrix().row(0);
  return out;
}

Tensor affine_backward(const Tensor& x, Parameter& weight, Parameter& bias, const Tensor& dout) {
  require_shape(dout, {x.dim(0), weight.value.dim(1)}, "affine upstream gradient");
  const auto d = dout.as_matrix();
  weight.grad.as_matrix().noalias() += x.as_matrix().transpose() * d;
  bias.grad.as_matrix().row(0) += d.colwise().sum();
  Tensor dx(x.shape());
  dx.as_matrix().noalias() = d * weight.value.as_matrix().transpose();
  return dx;
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 2, "log_softmax input");
  Tensor out(x.shape());
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* in = x.data() + i * cols;
    double* o = out.data() + i * cols;
    const double mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(in[j] - mx);
    const double log_z = mx + std::log(sum);
    for (std::size_t j = 0; j < cols; ++j) o[j] = in[j] - log_z;
  }
  return out;
}

Tensor log_softmax_backward(const Tensor& log_probs, const Tensor& dout) {
  require_shape(dout, log_probs.shape(), "log_softmax upstream gradient");
  Tensor dx(log_probs.shape());
  const std::size_t rows = log_probs.dim(0);
  const std::size_t cols = log_probs.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* lp = log_probs.data() + i * cols;
    const double* d = dout.data() + i * cols;
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += d[j];
    double* g = dx.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) g[j] = d[j] - std::exp(lp[j]) * total;
  }
  return dx;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logit(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& dout) {
  require_shape(dout, x.shape(), "relu upstream gradient");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? dout[i] : 0.0;
  return dx;
}

Tensor embedding_lookup(const Parameter& table, std::span<const int> ids) {
  require_rank(table.value, 2, "embedding table");
  const std::size_t vocab = table.value.dim(0);
  const std::size_t width = table.value.dim(1);
  Tensor out({ids.size(), width});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw std::out_of_range("embedding id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(vocab));
    }
    std::copy_n(table.value.data() + static_cast<std::size_t>(ids[i]) * width, width,
                out.data() + i * width);
  }
  return out;
}

void embedding_backward(Parameter& table, std::span<const int> ids, const Tensor& dout) {
  const std::size_t width = table.value.dim(1);
  require_shape(dout, {ids.size(), width}, "embedding upstream gradient");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double* g = table.grad.data() + static_cast<std::size_t>(ids[i]) * width;
    const double* d = dout.data() + i * width;
    for (std::size_t j = 0; j < width; ++j) g[j] += d[j];
  }
}

LstmCell::LstmCell(std::size_t input_dim_, std::size_t hidden_dim_)
    : input_dim(input_dim_), hidden_dim(hidden_dim_),
      w_input("lstm.w_input", {4 * hidden_dim_, input_dim_}),
      w_hidden("lstm.w_hidden", {4 * hidden_dim_, hidden_dim_}),
      bias("lstm.bias", {4 * hidden_dim_}) {}

LstmState lstm_step(const LstmCell& cell, const Tensor& x, const Tensor& h, const Tensor& c,
                    LstmStepCache* cache) {
  const std::size_t hidden = cell.hidden_dim;
  require_rank(x, 2, "lstm input");
  const std::size_t batch = x.dim(0);
  require_shape(x, {batch, cell.input_dim}, "lstm input");
  require_shape(h, {batch, hidden}, "lstm hidden state");
  require_shape(c, {batch, hidden}, "lstm cell state");

  Tensor gates({batch, 4 * hidden});
  auto g = gates.as_matrix();
  g.noalias() = x.as_matrix() * cell.w_input.value.as_matrix().transpose();
  g.noalias() += h.as_matrix() * cell.w_hidden.value.as_matrix().transpose();
  g.rowwise() += cell.bias.value.as_matrix().row(0);

  LstmState next{Tensor({batch, hidden}), Tensor({batch, hidden})};
  Tensor tanh_c({batch, hidden});
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = gates.data() + b * 4 * hidden;
    for (std::size_t k = 0; k < hidden; ++k) {
      const double in = sigmoid(row[k]);
      const double forget = sigmoid(row[hidden + k]);
      const double cand = std::tanh(row[2 * hidden + k]);
      const double out = sigmoid(row[3 * hidden + k]);
      row[k] = in;
      row[hidden + k] = forget;
      row[2 * hidden + k] = cand;
      row[3 * hidden + k] = out;
      const double c_new = forget * c(b, k) + in * cand;
      const double t = std::tanh(c_new);
      next.c(b, k) = c_new;
      tanh_c(b, k) = t;
      next.h(b, k) = out * t;
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->gates = std::move(gates);
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

LstmStepGrads lstm_step_backward(LstmCell& cell, const LstmStepCache& cache, const Tensor& dh,
                                 const Tensor& dc) {
  const std::size_t hidden = cell.hidden_dim;
  const std::size_t batch = cache.x.dim(0);
  require_shape(dh, {batch, hidden}, "lstm upstream dh");
  require_shape(dc, {batch, hidden}, "lstm upstream dc");

  Tensor dpre({batch, 4 * hidden});
  LstmStepGrads grads{Tensor(), Tensor(), Tensor({batch, hidden})};
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gate = cache.gates.data() + b * 4 * hidden;
    double* d = dpre.data() + b * 4 * hidden;
    for (std::size_t k = 0; k < hidden; ++k) {
      const double in = gate[k];
      const double forget = gate[hidden + k];
      const double cand = gate[2 * hidden + k];
      const double out = gate[3 * hidden + k];
      const double t = cache.tanh_c(b, k);
      const double dcell = dc(b, k) + dh(b, k) * out * (1.0 - t * t);
      d[k] = dcell * cand * in * (1.0 - in);
      d[hidden + k] = dcell * cache.c_prev(b, k) * forget * (1.0 - forget);
      d[2 * hidden + k] = dcell * in * (1.0 - cand * cand);
      d[3 * hidden + k] = dh(b, k) * t * out * (1.0 - out);
      grads.dc_prev(b, k) = dcell * forget;
    }
  }
  const auto dp = dpre.as_matrix();
  cell.w_input.grad.as_matrix().noalias() += dp.transpose() * cache.x.as_matrix();
  cell.w_hidden.grad.as_matrix().noalias() += dp.transpose() * cache.h_prev.as_matrix();
  cell.bias.grad.as_matrix().row(0) += dp.colwise().sum();
  grads.dx = Tensor({batch, cell.input_dim});
  grads.dx.as_matrix().noalias() = dp * cell.w_input.value.as_matrix();
  grads.dh_prev = Tensor({batch, hidden});
  grads.dh_prev.as_matrix().noalias() = dp * cell.w_hidden.value.as_matrix();
  return grads;
}

ConvBank::ConvBank(std::size_t width_, std::size_t input_dim, std::size_t feature_maps)
    : width(width_),
      filter("conv" + std::to_string(width_) + ".filter", {width_, input_dim, feature_maps}),
      bias("conv" + std::to_string(width_) + ".bias", {feature_maps}) {}

Tensor conv1d_maxpool(const Tensor& x, const std::vector<ConvBank>& banks, ConvCache* cache) {
  require_rank(x, 3, "conv input");
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(1);
  const std::size_t depth = x.dim(2);
  std::size_t total = 0;
  for (const auto& bank : banks) {
    if (bank.width == 0 || bank.width > steps) {
      throw std::invalid_argument("conv filter width " + std::to_string(bank.width) +
                                  " exceeds sequence length " + std::to_string(steps));
    }
    require_shape(bank.filter.value, {bank.width, depth, bank.bias.value.dim(0)}, "conv filter");
    total += bank.bias.value.dim(0);
  }
  Tensor out({batch, total});
  if (cache != nullptr) {
    cache->x = x;
    cache->argmax.assign(banks.size(), {});
  }
  std::size_t offset = 0;
  for (std::size_t k = 0; k < banks.size(); ++k) {
    const auto& bank = banks[k];
    const std::size_t maps = bank.bias.value.dim(0);
    const std::size_t positions = steps - bank.width + 1;
    const ConstMatrixMap w(bank.filter.value.data(), static_cast<Eigen::Index>(bank.width * depth),
                           static_cast<Eigen::Index>(maps));
    std::vector<std::size_t> arg(batch * maps, 0);
    RowMatrix response(static_cast<Eigen::Index>(positions), static_cast<Eigen::Index>(maps));
    for (std::size_t b = 0; b < batch; ++b) {
      const ConstStridedMap windows(x.data() + b * steps * depth,
                                    static_cast<Eigen::Index>(positions),
                                    static_cast<Eigen::Index>(bank.width * depth),
                                    Eigen::OuterStride<>(static_cast<Eigen::Index>(depth)));
      response.noalias() = windows * w;
      for (std::size_t f = 0; f < maps; ++f) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < positions; ++t) {
          if (response(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) >
              response(static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(f))) {
            best = t;
          }
        }
        arg[b * maps + f] = best;
        out(b, offset + f) =
            response(static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(f)) +
            bank.bias.value[f];
      }
    }
    if (cache != nullptr) cache->argmax[k] = std::move(arg);
    offset += maps;
  }
  return out;
}

Tensor conv1d_maxpool_backward(std::vector<ConvBank>& banks, const ConvCache& cache,
                               const Tensor& dout) {
  const Tensor& x = cache.x;
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(1);
  const std::size_t depth = x.dim(2);
  Tensor dx(x.shape());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < banks.size(); ++k) {
    auto& bank = banks[k];
    const std::size_t maps = bank.bias.value.dim(0);
    const std::size_t span_len = bank.width * depth;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < maps; ++f) {
        const double g = dout(b, offset + f);
        if (g == 0.0) continue;
        const std::size_t t = cache.argmax[k][b * maps + f];
        const double* window = x.data() + (b * steps + t) * depth;
        double* dwindow = dx.data() + (b * steps + t) * depth;
        for (std::size_t i = 0; i < span_len; ++i) {
          bank.filter.grad[i * maps + f] += g * window[i];
          dwindow[i] += g * bank.filter.value[i * maps + f];
        }
        bank.bias.grad[f] += g;
      }
    }
    offset += maps;
  }
  return dx;
}

Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (double& v : mask.values()) v = keep(rng) ? scale : 0.0;
  return mask;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_shape(b, a.shape(), "hadamard operand");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad.values()) g *= scale;
    }
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

bool grads_finite(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) return false;
  }
  return true;
}

}  // namespace lyricgan::nn
