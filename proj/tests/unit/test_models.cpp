#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lyricgan/models.hpp"
#include "lyricgan/nn/optim.hpp"
#include "lyricgan/training.hpp"

using namespace lyricgan;
using namespace lyricgan::nn;

namespace {

constexpr std::size_t kLyricVocab = 12;
constexpr std::size_t kNoteVocab = 9;
constexpr std::size_t kThemeDim = 3;

GeneratorConfig small_config(ConditioningMode mode) {
  GeneratorConfig c;
  c.mode = mode;
  c.lyric_vocab = kLyricVocab;
  c.melody_vocab = kNoteVocab;
  c.embedding_dim = 4;
  c.hidden_dim = 5;
  c.theme_dim = uses_theme(mode) ? kThemeDim : 0;
  return c;
}

EncodedBatch random_batch(std::mt19937_64& rng, std::size_t rows, std::size_t max_len) {
  std::uniform_int_distribution<int> syl(kNumSpecials, kLyricVocab - 1), note(kNumSpecials, kNoteVocab - 1);
  std::uniform_int_distribution<std::size_t> len(1, max_len - 2);
  std::vector<EncodedRow> out;
  for (std::size_t r = 0; r < rows; ++r) {
    EncodedRow row;
    const std::size_t n = len(rng);
    row.lyrics.assign(max_len, kPad);
    row.notes.assign(max_len, kPad);
    row.lyrics[0] = row.notes[0] = kStart;
    for (std::size_t i = 1; i <= n; ++i) {
      row.lyrics[i] = syl(rng);
      row.notes[i] = note(rng);
    }
    row.lyrics[n + 1] = row.notes[n + 1] = kEnd;
    row.length = static_cast<int>(n + 2);
    out.push_back(row);
  }
  return make_batch(out, max_len);
}

Tensor random_themes(std::mt19937_64& rng, std::size_t rows) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({rows, kThemeDim});
  for (double& v : t.values()) v = n(rng);
  return t;
}

const ConditioningMode kModes[] = {ConditioningMode::kNone, ConditioningMode::kMelody,
                                   ConditioningMode::kMelodyTheme};

std::vector<double> flat_grads(Generator& g) {
  std::vector<double> out;
  for (auto* p : g.parameters()) out.insert(out.end(), p->grad.values().begin(), p->grad.values().end());
  return out;
}

}  // namespace

TEST_CASE("generator parameter counts") {
  GeneratorConfig c;
  c.lyric_vocab = 10;
  c.embedding_dim = 3;
  c.hidden_dim = 2;
  // 10*3 embedding + 4*2*3 + 4*2*2 + 4*2 lstm + 2*10 + 10 output.
  CHECK(generator_parameter_count(c) == 108);
  c.mode = ConditioningMode::kMelody;
  c.melody_vocab = 7;
  // + 7*3 melody embedding, input grows by 3: + 4*2*3.
  CHECK(generator_parameter_count(c) == 108 + 21 + 24);
  c.mode = ConditioningMode::kMelodyTheme;
  c.theme_dim = 5;
  CHECK(generator_parameter_count(c) == 108 + 21 + 24 + 5 * 2 + 2);
  for (auto mode : kModes) {
    const Generator g(small_config(mode), 1);
    std::size_t sum = 0;
    for (const auto* p : g.parameters()) sum += p->size();
    CHECK(g.parameter_count() == sum);
    CHECK(generator_parameter_count(g.config()) == sum);
  }
}

TEST_CASE("discriminator parameter count") {
  DiscriminatorConfig c;
  c.vocab = 10;
  c.embedding_dim = 3;
  c.filter_widths = {2, 3};
  c.feature_maps = 4;
  c.hidden_dim = 6;
  // 30 + (2*3*4+4) + (3*3*4+4) + 8*6+6 + 6+1.
  CHECK(discriminator_parameter_count(c) == 30 + 28 + 40 + 54 + 7);
  const Discriminator d(c, 1);
  std::size_t sum = 0;
  for (const auto* p : d.parameters()) sum += p->size();
  CHECK(d.parameter_count() == sum);
}

TEST_CASE("generator forward gives normalized log-probabilities") {
  std::mt19937_64 rng(1);
  for (auto mode : kModes) {
    const Generator g(small_config(mode), 2);
    const auto batch = random_batch(rng, 3, 8);
    const Tensor themes = random_themes(rng, 3);
    const auto lp = g.forward(batch, uses_theme(mode) ? &themes : nullptr);
    REQUIRE(lp.shape() == std::vector<std::size_t>{3, 7, kLyricVocab});
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t t = 0; t < 7; ++t) {
        double s = 0;
        for (std::size_t v = 0; v < kLyricVocab; ++v) s += std::exp(lp(b, t, v));
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("themed generator requires themes of the right width") {
  std::mt19937_64 rng(1);
  const Generator g(small_config(ConditioningMode::kMelodyTheme), 2);
  const auto batch = random_batch(rng, 2, 6);
  CHECK_THROWS_AS(g.forward(batch, nullptr), std::invalid_argument);
  const Tensor wrong({2, kThemeDim + 1});
  CHECK_THROWS_AS(g.forward(batch, &wrong), std::invalid_argument);
}

TEST_CASE("mle loss gradient matches finite differences for every mode") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (auto mode : kModes) {
      std::mt19937_64 rng(seed);
      Generator g(small_config(mode), seed + 10);
      const auto batch = random_batch(rng, 2, 6);
      const Tensor themes = random_themes(rng, 2);
      const Tensor* th = uses_theme(mode) ? &themes : nullptr;
      auto params = g.parameters();
      LossFn f = [&](bool grad) {
        if (grad) zero_grads(params);
        return g.mle_loss(batch, th, grad);
      };
      CHECK(grad_check(f, params) < 1e-4);
    }
  }
}

TEST_CASE("policy gradient loss gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (auto mode : kModes) {
      std::mt19937_64 rng(seed);
      Generator g(small_config(mode), seed + 20);
      const auto batch = random_batch(rng, 3, 7);
      const Tensor themes = random_themes(rng, 3);
      const Tensor* th = uses_theme(mode) ? &themes : nullptr;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> rewards(3 * 6);
      for (double& r : rewards) r = u(rng);
      auto params = g.parameters();
      LossFn f = [&](bool grad) {
        if (grad) zero_grads(params);
        return g.policy_gradient_loss(batch, th, rewards, grad);
      };
      CHECK(grad_check(f, params) < 1e-4);
    }
  }
}

TEST_CASE("policy gradient with constant rewards is parallel to the mle gradient") {
  std::mt19937_64 rng(3);
  for (auto mode : kModes) {
    Generator g(small_config(mode), 4);
    const auto batch = random_batch(rng, 4, 8);
    const Tensor themes = random_themes(rng, 4);
    const Tensor* th = uses_theme(mode) ? &themes : nullptr;
    auto params = g.parameters();
    zero_grads(params);
    g.mle_loss(batch, th, true);
    const auto mle = flat_grads(g);
    zero_grads(params);
    std::vector<double> rewards(4 * 7, 0.7);
    g.policy_gradient_loss(batch, th, rewards, true);
    const auto pg = flat_grads(g);
    const double dot = std::inner_product(mle.begin(), mle.end(), pg.begin(), 0.0);
    const double nm = std::sqrt(std::inner_product(mle.begin(), mle.end(), mle.begin(), 0.0));
    const double np = std::sqrt(std::inner_product(pg.begin(), pg.end(), pg.begin(), 0.0));
    CHECK(dot / (nm * np) > 0.999999);
  }
}

TEST_CASE("rewards past the end token do not move the policy gradient") {
  std::mt19937_64 rng(5);
  Generator g(small_config(ConditioningMode::kMelody), 6);
  const auto batch = random_batch(rng, 3, 8);
  auto params = g.parameters();
  std::vector<double> a(3 * 7, 0.5), b = a;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t t = static_cast<std::size_t>(batch.lengths[r]) - 1; t < 7; ++t) b[r * 7 + t] = 9.0;
  }
  zero_grads(params);
  const double la = g.policy_gradient_loss(batch, nullptr, a, true);
  const auto ga = flat_grads(g);
  zero_grads(params);
  const double lb = g.policy_gradient_loss(batch, nullptr, b, true);
  CHECK(la == lb);
  CHECK(ga == flat_grads(g));
}

TEST_CASE("theme reaches the output and receives gradient") {
  std::mt19937_64 rng(7);
  Generator g(small_config(ConditioningMode::kMelodyTheme), 8);
  const auto batch = random_batch(rng, 2, 6);
  Tensor t1 = random_themes(rng, 2), t2 = t1;
  t2[0] += 1.0;
  CHECK(!(g.forward(batch, &t1) == g.forward(batch, &t2)));
  auto params = g.parameters();
  zero_grads(params);
  g.mle_loss(batch, &t1, true);
  for (auto* p : params) {
    if (p->name.starts_with("theme")) {
      double norm = 0;
      for (double v : p->grad.values()) norm += v * v;
      CHECK(norm > 0);
    }
  }
}

TEST_CASE("discriminator loss gradient and output range") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(seed);
    DiscriminatorConfig c;
    c.vocab = kLyricVocab;
    c.embedding_dim = 3;
    c.feature_maps = 2;
    c.hidden_dim = 4;
    Discriminator d(c, seed + 1);
    const auto batch = random_batch(rng, 4, 9);
    std::vector<std::vector<int>> rows;
    for (std::size_t r = 0; r < 4; ++r) rows.push_back(batch.lyric_row(r));
    const std::vector<double> labels{1, 0, 1, 0};
    auto params = d.parameters();
    LossFn f = [&](bool grad) {
      if (grad) zero_grads(params);
      std::mt19937_64 mask(seed);  // same dropout mask on every evaluation
      return d.loss(rows, labels, mask, grad);
    };
    CHECK(grad_check(f, params) < 1e-4);
    for (double p : d.predict(rows)) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("sampling respects masks, layout and seeds") {
  for (auto mode : kModes) {
    const Generator g(small_config(mode), 9);
    std::mt19937_64 ctx_rng(1);
    std::vector<GenerationContext> contexts;
    const auto batch = random_batch(ctx_rng, 20, 10);
    for (std::size_t r = 0; r < 20; ++r) {
      GenerationContext c;
      if (uses_melody(mode)) c.melody = batch.note_row(r);
      if (uses_theme(mode)) c.theme = {0.1 * static_cast<double>(r), -0.2, 0.3};
      contexts.push_back(c);
    }
    std::mt19937_64 r1(5), r2(5);
    const auto rows = g.sample(contexts, 10, r1);
    CHECK(rows == g.sample(contexts, 10, r2));
    REQUIRE(rows.size() == 20);
    for (const auto& row : rows) {
      REQUIRE(row.size() == 10);
      CHECK(row[0] == kStart);
      bool ended = false;
      for (std::size_t t = 1; t < row.size(); ++t) {
        if (ended) {
          CHECK(row[t] == kPad);
          continue;
        }
        CHECK(row[t] != kPad);
        CHECK(row[t] != kStart);
        CHECK(row[t] != kUnk);
        ended = row[t] == kEnd;
      }
    }
  }
}
