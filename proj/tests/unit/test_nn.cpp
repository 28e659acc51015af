#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "lyricgan/nn/ops.hpp"
#include "lyricgan/nn/optim.hpp"
#include "lyricgan/nn/tensor.hpp"

using namespace lyricgan::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.values()) v = u(rng);
  return t;
}

Parameter random_param(const char* name, std::vector<std::size_t> shape, std::mt19937_64& rng,
                       double scale = 0.5) {
  Parameter p(name, std::move(shape));
  p.value = random_tensor(p.value.shape(), rng, scale);
  return p;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Long-double log-softmax of one row, an independent oracle.
std::vector<long double> log_softmax_oracle(const std::vector<long double>& row) {
  long double m = row[0];
  for (auto v : row) m = std::max(m, v);
  long double s = 0;
  for (auto v : row) s += std::exp(v - m);
  std::vector<long double> out;
  for (auto v : row) out.push_back(v - m - std::log(s));
  return out;
}

}  // namespace

TEST_CASE("affine hand values") {
  Parameter w("w", {2, 2}), b("b", {2});
  w.value = Tensor::matrix({{1, 0}, {0, 1}});
  auto out = affine(Tensor::matrix({{1, 2}}), w, b);
  CHECK(out == Tensor::matrix({{1, 2}}));

  Parameter w2("w", {2, 1}), b2("b", {1});
  w2.value = Tensor::matrix({{2}, {3}});
  b2.value = Tensor::vector({1});
  CHECK(affine(Tensor::matrix({{1, 1}}), w2, b2)(0, 0) == doctest::Approx(6.0));

  Parameter wz("w", {3, 2}), bz("b", {2});
  std::mt19937_64 rng(3);
  auto z = affine(random_tensor({4, 3}, rng), wz, bz);
  for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("affine rejects mismatched shapes") {
  Parameter w("w", {3, 2}), b("b", {2});
  CHECK_THROWS_AS(affine(Tensor({1, 2}), w, b), std::invalid_argument);
}

TEST_CASE("log_softmax values and stability") {
  auto uniform = log_softmax(Tensor::matrix({{0, 0, 0, 0}}));
  for (double v : uniform.values()) CHECK(v == doctest::Approx(std::log(0.25)).epsilon(1e-15));

  auto big = log_softmax(Tensor::matrix({{1000, 0}}));
  CHECK(std::isfinite(big[0]));
  CHECK(std::abs(big[0]) < 1e-300);
  CHECK(big[1] == doctest::Approx(-1000.0));

  auto ref = log_softmax_oracle({1.0L, 2.0L, 3.0L});
  auto got = log_softmax(Tensor::matrix({{1, 2, 3}}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - static_cast<double>(ref[i])) < 1e-15);
}

TEST_CASE("log_softmax rows normalize and ignore constant shifts") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t rows = 1 + seed % 4, cols = 1 + seed % 9;
    auto x = random_tensor({rows, cols}, rng, 20.0);
    auto y = log_softmax(x);
    auto shifted = x;
    const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    for (double& v : shifted.values()) v += c;
    auto ys = log_softmax(shifted);
    for (std::size_t r = 0; r < rows; ++r) {
      long double s = 0;
      for (std::size_t k = 0; k < cols; ++k) s += std::exp(static_cast<long double>(y(r, k)));
      CHECK(std::abs(static_cast<double>(s) - 1.0) < 1e-9);
      for (std::size_t k = 0; k < cols; ++k) CHECK(std::abs(y(r, k) - ys(r, k)) < 1e-9);
    }
  }
}

TEST_CASE("lstm_step hand values") {
  LstmCell cell(3, 2);
  Tensor x({1, 3}, 0.7), h({1, 2}), c({1, 2});
  auto s = lstm_step(cell, x, h, c);
  for (double v : s.h.values()) CHECK(v == 0.0);
  for (double v : s.c.values()) CHECK(v == 0.0);

  Tensor c0 = Tensor::matrix({{1.5, -2.0}});
  auto s2 = lstm_step(cell, x, h, c0);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(s2.c[j] == doctest::Approx(0.5 * c0[j]).epsilon(1e-15));
    CHECK(s2.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * c0[j])).epsilon(1e-15));
  }
}

TEST_CASE("conv1d_maxpool hand values") {
  ConvBank ones(2, 1, 1);
  ones.filter.value.fill(1.0);
  Tensor x({1, 5, 1}, 1.0);
  CHECK(conv1d_maxpool(x, {ones})(0, 0) == doctest::Approx(2.0));

  ConvBank zero(3, 2, 4);
  std::mt19937_64 rng(1);
  auto out = conv1d_maxpool(random_tensor({2, 6, 2}, rng), {zero});
  for (double v : out.values()) CHECK(v == 0.0);

  ConvBank wide(7, 2, 1);
  CHECK_THROWS(conv1d_maxpool(Tensor({1, 6, 2}), {wide}));
}

namespace {

// Runs `check(seed, rng, B, D, K)` over 20 seeds with small varying shapes.
template <class Check>
void over_seeds(Check check) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    check(seed, rng, 1 + seed % 3, 2 + seed % 3, 2 + seed % 4);
  }
}

const GradCheckOptions kOpts;

}  // namespace

TEST_CASE("affine gradient matches finite differences on 20 seeds") {
  over_seeds([]([[maybe_unused]] std::uint64_t seed, std::mt19937_64& rng,
                [[maybe_unused]] std::size_t B, [[maybe_unused]] std::size_t D,
                [[maybe_unused]] std::size_t K) {
    Parameter x = random_param("x", {B, D}, rng), w = random_param("w", {D, K}, rng),
              b = random_param("b", {K}, rng);
    const Tensor r = random_tensor({B, K}, rng);
    LossFn f = [&](bool grad) {
      auto out = affine(x.value, w, b);
      if (grad) {
        w.zero_grad();
        b.zero_grad();
        x.grad = affine_backward(x.value, w, b, r);
      }
      return dot(out, r);
    };
    std::vector<Parameter*> ps{&x, &w, &b};
    CHECK(grad_check(f, ps, kOpts) < 1e-4);
  });
}

TEST_CASE("log_softmax gradient matches finite differences on 20 seeds") {
  over_seeds([]([[maybe_unused]] std::uint64_t seed, std::mt19937_64& rng,
                [[maybe_unused]] std::size_t B, [[maybe_unused]] std::size_t D,
                [[maybe_unused]] std::size_t K) {
    Parameter x = random_param("x", {B, K}, rng, 3.0);
    const Tensor r = random_tensor({B, K}, rng);
    LossFn f = [&](bool grad) {
      auto y = log_softmax(x.value);
      if (grad) x.grad = log_softmax_backward(y, r);
      return dot(y, r);
    };
    std::vector<Parameter*> ps{&x};
    CHECK(grad_check(f, ps, kOpts) < 1e-4);
  });
}

TEST_CASE("embedding gradient matches finite differences on 20 seeds") {
  over_seeds([]([[maybe_unused]] std::uint64_t seed, std::mt19937_64& rng,
                [[maybe_unused]] std::size_t B, [[maybe_unused]] std::size_t D,
                [[maybe_unused]] std::size_t K) {
    Parameter table = random_param("t", {6, D}, rng);
    const std::vector<int> ids{1, 4, 1, 0};
    const Tensor r = random_tensor({ids.size(), D}, rng);
    LossFn f = [&](bool grad) {
      auto y = embedding_lookup(table, ids);
      if (grad) {
        table.zero_grad();
        embedding_backward(table, ids, r);
      }
      return dot(y, r);
    };
    std::vector<Parameter*> ps{&table};
    CHECK(grad_check(f, ps, kOpts) < 1e-4);
  });
}

TEST_CASE("lstm_step gradient matches finite differences on 20 seeds") {
  over_seeds([]([[maybe_unused]] std::uint64_t seed, std::mt19937_64& rng,
                [[maybe_unused]] std::size_t B, [[maybe_unused]] std::size_t D,
                [[maybe_unused]] std::size_t K) {
    LstmCell cell(D, K);
    std::mt19937_64 init(seed + 100);
    for (Parameter* p : {&cell.w_input, &cell.w_hidden, &cell.bias}) init_uniform(*p, init, 0.5);
    Parameter x = random_param("x", {B, D}, rng), h = random_param("h", {B, K}, rng),
              c = random_param("c", {B, K}, rng);
    const Tensor rh = random_tensor({B, K}, rng), rc = random_tensor({B, K}, rng);
    LossFn f = [&](bool grad) {
      LstmStepCache cache;
      auto s = lstm_step(cell, x.value, h.value, c.value, &cache);
      if (grad) {
        for (Parameter* p : {&cell.w_input, &cell.w_hidden, &cell.bias}) p->zero_grad();
        auto g = lstm_step_backward(cell, cache, rh, rc);
        x.grad = g.dx;
        h.grad = g.dh_prev;
        c.grad = g.dc_prev;
      }
      return dot(s.h, rh) + dot(s.c, rc);
    };
    std::vector<Parameter*> ps{&cell.w_input, &cell.w_hidden, &cell.bias, &x, &h, &c};
    CHECK(grad_check(f, ps, kOpts) < 1e-4);
  });
}

TEST_CASE("conv1d_maxpool gradient matches finite differences on 20 seeds") {
  over_seeds([]([[maybe_unused]] std::uint64_t seed, std::mt19937_64& rng,
                [[maybe_unused]] std::size_t B, [[maybe_unused]] std::size_t D,
                [[maybe_unused]] std::size_t K) {
    std::vector<ConvBank> banks{ConvBank(2, D, 3), ConvBank(3, D, 2)};
    std::mt19937_64 init(seed + 200);
    for (auto& bank : banks) {
      init_uniform(bank.filter, init, 0.5);
      init_uniform(bank.bias, init, 0.5);
    }
    Parameter x = random_param("x", {B, 5, D}, rng);
    const Tensor r = random_tensor({B, 5}, rng);
    LossFn f = [&](bool grad) {
      ConvCache cache;
      auto y = conv1d_maxpool(x.value, banks, &cache);
      if (grad) {
        for (auto& bank : banks) {
          bank.filter.zero_grad();
          bank.bias.zero_grad();
        }
        x.grad = conv1d_maxpool_backward(banks, cache, r);
      }
      return dot(y, r);
    };
    std::vector<Parameter*> ps{&banks[0].filter, &banks[0].bias, &banks[1].filter,
                               &banks[1].bias, &x};
    CHECK(grad_check(f, ps, kOpts) < 1e-4);
  });
}

TEST_CASE("relu gradient matches finite differences on 20 seeds") {
  over_seeds([]([[maybe_unused]] std::uint64_t seed, std::mt19937_64& rng,
                [[maybe_unused]] std::size_t B, [[maybe_unused]] std::size_t D,
                [[maybe_unused]] std::size_t K) {
    Parameter x = random_param("x", {B, K}, rng);
    for (double& v : x.value.values()) v += v > 0 ? 0.05 : -0.05;  // stay off the kink
    const Tensor r = random_tensor({B, K}, rng);
    LossFn f = [&](bool grad) {
      auto y = relu(x.value);
      if (grad) x.grad = relu_backward(x.value, r);
      return dot(y, r);
    };
    std::vector<Parameter*> ps{&x};
    CHECK(grad_check(f, ps, kOpts) < 1e-4);
  });
}

TEST_CASE("bce_with_logit matches the direct formula and stays finite") {
  for (double z : {-3.0, -0.2, 0.0, 1.7, 4.0}) {
    for (double y : {0.0, 1.0}) {
      const double p = 1.0 / (1.0 + std::exp(-z));
      CHECK(bce_with_logit(z, y) == doctest::Approx(-(y * std::log(p) + (1 - y) * std::log(1 - p))));
    }
  }
  CHECK(std::isfinite(bce_with_logit(800.0, 0.0)));
  CHECK(std::isfinite(bce_with_logit(-800.0, 1.0)));
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("grad_check on a quadratic") {
  Parameter w("w", {1});
  w.value[0] = 3.0;
  LossFn f = [&](bool grad) {
    if (grad) w.grad[0] = 2 * w.value[0];
    return w.value[0] * w.value[0];
  };
  std::vector<Parameter*> ps{&w};
  CHECK(grad_check(f, ps) < 1e-8);
  f(true);
  CHECK(w.grad[0] == 6.0);

  LossFn bad = [](bool) { return std::nan(""); };
  CHECK_THROWS(grad_check(bad, ps));
}

TEST_CASE("adam steps") {
  Parameter p("p", {3});
  p.value = Tensor::vector({1, -2, 3});
  const Tensor before = p.value;
  AdamConfig cfg;
  adam_step(p, cfg, 1);
  CHECK(p.value == before);

  Parameter s("s", {1});
  s.grad[0] = 0.37;
  adam_step(s, cfg, 1);
  const double delta = std::abs(s.value[0]);
  CHECK(delta <= cfg.learning_rate);
  CHECK(delta > cfg.learning_rate * (1 - 1e-6));

  // Hand-stepped oracle for g then -g.
  Parameter q("q", {1});
  q.value[0] = 0.5;
  const double g = 0.8;
  double m = 0, v = 0, x = 0.5;
  for (int t = 1; t <= 2; ++t) {
    const double gt = t == 1 ? g : -g;
    q.grad[0] = gt;
    adam_step(q, cfg, t);
    m = cfg.beta1 * m + (1 - cfg.beta1) * gt;
    v = cfg.beta2 * v + (1 - cfg.beta2) * gt * gt;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    x -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    CHECK(q.value[0] == doctest::Approx(x).epsilon(1e-14));
  }
  CHECK(q.value[0] > 0.5 - cfg.learning_rate);
}

TEST_CASE("adagrad steps") {
  Parameter p("p", {2});
  p.value = Tensor::vector({0.3, 0.4});
  const Tensor before = p.value;
  adagrad_step(p, {0.1, 1e-10});
  CHECK(p.value == before);

  Parameter s("s", {1});
  s.grad[0] = 2.0;
  adagrad_step(s, {0.1, 0.0});
  CHECK(s.value[0] == doctest::Approx(-0.1).epsilon(1e-15));

  double last = 1e9;
  for (int i = 0; i < 5; ++i) {
    const double x0 = s.value[0];
    adagrad_step(s, {0.1, 0.0});
    const double step = std::abs(s.value[0] - x0);
    CHECK(step < last);
    last = step;
  }
}

TEST_CASE("zero grads, clipping and finiteness") {
  Parameter a("a", {2, 2}), b("b", {3});
  a.grad.fill(3.0);
  b.grad.fill(4.0);
  std::vector<Parameter*> ps{&a, &b};
  const double norm = std::sqrt(4 * 9.0 + 3 * 16.0);
  CHECK(global_grad_norm(ps) == doctest::Approx(norm));
  CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(norm));
  CHECK(global_grad_norm(ps) == doctest::Approx(5.0));
  CHECK(clip_grad_norm(ps, 50.0) == doctest::Approx(5.0));
  CHECK(global_grad_norm(ps) == doctest::Approx(5.0));
  CHECK(grads_finite(ps));
  b.grad[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(grads_finite(ps));
  zero_grads(ps);
  for (double v : a.grad.values()) CHECK(v == 0.0);
  for (double v : b.grad.values()) CHECK(v == 0.0);
}

TEST_CASE("dropout mask is inverted and seeded") {
  std::mt19937_64 r1(9), r2(9);
  auto m1 = dropout_mask({50, 40}, 0.25, r1);
  auto m2 = dropout_mask({50, 40}, 0.25, r2);
  CHECK(m1 == m2);
  double sum = 0;
  for (double v : m1.values()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    sum += v;
  }
  CHECK(sum / m1.size() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("tensor invariants") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(shape_size(t.shape()) == t.size());
  CHECK_THROWS(Tensor({2, 2}, std::vector<double>{1, 2, 3}));
  Parameter p("p", {4, 5});
  CHECK(p.grad.shape() == p.value.shape());
  std::mt19937_64 rng(5);
  init_uniform(p, rng, 0.1);
  for (double v : p.value.values()) CHECK(std::abs(v) <= 0.1);
}
