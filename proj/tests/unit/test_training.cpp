#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lyricgan/pipeline.hpp"
#include "lyricgan/synth.hpp"
#include "lyricgan/training.hpp"

using namespace lyricgan;

namespace {

const PreparedCorpus& small_corpus() {
  static const PreparedCorpus corpus = prepare_corpus(synth_corpus(1, 20, 12).lines, 1);
  return corpus;
}

GeneratorConfig gen_config(const TrainingSet& data, const PreparedCorpus& corpus) {
  GeneratorConfig c;
  c.mode = data.mode;
  c.lyric_vocab = corpus.vocab.syllable_count();
  c.melody_vocab = corpus.vocab.note_count();
  c.embedding_dim = 8;
  c.hidden_dim = 16;
  return c;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.mle_epochs = 10;
  c.disc_epochs = 1;
  c.adversarial_rounds = 2;
  c.pg_batches = 2;
  c.batch_size = 16;
  c.rollouts = 2;
  c.bleu_lines = 10;
  return c;
}

// Scores 1 feature: whether `marker` occurs anywhere in the row.
// P(real) = sigmoid(bias) without it, sigmoid(weight + bias) with it.
Discriminator marker_discriminator(std::size_t vocab, int marker, double weight, double bias) {
  DiscriminatorConfig c;
  c.vocab = vocab;
  c.embedding_dim = 1;
  c.filter_widths = {1};
  c.feature_maps = 1;
  c.hidden_dim = 1;
  c.dropout = 0.0;
  Discriminator d(c, 1);
  for (auto* p : d.parameters()) p->value.set_zero();
  auto params = d.parameters();
  params[0]->value[static_cast<std::size_t>(marker)] = 1.0;  // embedding
  params[1]->value[0] = 1.0;                                  // conv filter
  params[3]->value[0] = 1.0;                                  // hidden weight
  params[5]->value[0] = weight;                               // output weight
  params[6]->value[0] = bias;                                 // output bias
  return d;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("train config json round trip and validation") {
  TrainConfig c = quick_config();
  c.pg_learning_rate = 1e-4;
  CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = quick_config();
  c.rollouts = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("rng state round trip") {
  std::mt19937_64 a(99);
  a.discard(17);
  auto b = rng_from_state(rng_state(a));
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
}

TEST_CASE("mle loss falls over the first epochs") {
  const auto& corpus = small_corpus();
  const auto data = make_training_set(ConditioningMode::kMelody, corpus, nullptr);
  Generator g(gen_config(data, corpus), 3);
  const auto config = quick_config();
  nn::Adam adam(config.adam);
  std::mt19937_64 rng(1);
  std::vector<LogRecord> log;
  const auto losses = mle_pretrain(g, adam, data, config, rng, [&](const LogRecord& r) { log.push_back(r); });
  REQUIRE(losses.size() == 10);
  for (std::size_t e = 1; e < losses.size(); ++e) CHECK(losses[e] < losses[e - 1]);
  CHECK(losses.back() < 0.9 * losses.front());
  CHECK(log.size() == 10);
  CHECK(log.front().phase == "mle");
  CHECK(validation_loss(g, data, 16) < losses.front());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto& corpus = small_corpus();
  const auto data = make_training_set(ConditioningMode::kMelody, corpus, nullptr);
  Generator g(gen_config(data, corpus), 4);
  const Generator before = g;
  nn::AdamConfig zero;
  zero.learning_rate = 0.0;
  nn::Adam adam(zero);
  std::vector<EncodedRow> rows(data.train.begin(), data.train.begin() + 8);
  const auto batch = make_batch(rows, data.max_len);
  mle_step(g, adam, batch, nullptr, 5.0);
  std::vector<double> rewards(8 * (data.max_len - 1), 0.5);
  pg_step(g, adam, batch, nullptr, rewards, 5.0);
  const auto a = g.parameters();
  const auto b = before.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
}

TEST_CASE("rollouts keep the prefix and finished prefixes are copied") {
  const auto& corpus = small_corpus();
  const auto data = make_training_set(ConditioningMode::kMelody, corpus, nullptr);
  const Generator g(gen_config(data, corpus), 5);
  const auto contexts = data.contexts({data.train.front()});
  const auto batch = sequence_batch({data.train.front().lyrics}, contexts, data.max_len);
  const auto states = g.teacher_states(batch, nullptr);
  std::mt19937_64 rng(2);
  for (std::size_t p : {std::size_t{1}, std::size_t{2}}) {
    Generator::PartialRow prefix;
    prefix.tokens.assign(data.max_len, kPad);
    std::copy_n(data.train.front().lyrics.begin(), p + 1, prefix.tokens.begin());
    prefix.position = p;
    prefix.state = states[p];
    const auto out = mc_rollout(g, prefix, contexts, 6, rng);
    REQUIRE(out.size() == 6);
    for (const auto& row : out) {
      CHECK(std::equal(row.begin(), row.begin() + static_cast<long>(p + 1), prefix.tokens.begin()));
      CHECK(std::find(row.begin(), row.end(), kEnd) != row.end());
    }
  }
  // A prefix that already ends in <END>.
  Generator::PartialRow done;
  done.tokens = data.train.front().lyrics;
  done.position = static_cast<std::size_t>(data.train.front().length) - 1;
  done.state = states[done.position];
  for (const auto& row : mc_rollout(g, done, contexts, 3, rng)) CHECK(row == done.tokens);
}

TEST_CASE("rewards from a constructed discriminator") {
  const auto& corpus = small_corpus();
  const auto data = make_training_set(ConditioningMode::kMelody, corpus, nullptr);
  const Generator g(gen_config(data, corpus), 6);
  const std::size_t vocab = corpus.vocab.syllable_count();
  const double lo = sigmoid(-1.0), hi = sigmoid(2.0 - 1.0);

  // A marker that never occurs: every reward is the constant score.
  const auto never = marker_discriminator(vocab, kUnk, 2.0, -1.0);
  std::mt19937_64 rng(3);
  std::vector<EncodedRow> rows(data.train.begin(), data.train.begin() + 6);
  const auto contexts = data.contexts(rows);
  const auto sequences = g.sample(contexts, data.max_len, rng);
  const auto flat = compute_rewards(g, never, sequences, contexts, 3, rng);
  const std::size_t width = data.max_len - 1;
  REQUIRE(flat.size() == sequences.size() * width);
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const auto end = static_cast<std::size_t>(std::find(sequences[b].begin(), sequences[b].end(), kEnd) -
                                              sequences[b].begin());
    for (std::size_t t = 0; t < width; ++t) {
      if (t < end) CHECK(flat[b * width + t] == doctest::Approx(lo).epsilon(1e-12));
      else CHECK(flat[b * width + t] == 0.0);
    }
  }

  // Marker = the first sampled syllable of each row: once a prefix holds it,
  // every rollout does too, so the reward is exactly the high score.
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const int marker = sequences[b][1];
    const auto disc = marker_discriminator(vocab, marker, 2.0, -1.0);
    const std::vector<std::vector<int>> one{sequences[b]};
    const std::vector<GenerationContext> ctx{contexts[b]};
    const auto r = compute_rewards(g, disc, one, ctx, 4, rng);
    CHECK(r[0] == doctest::Approx(hi).epsilon(1e-12));
    for (double v : r) {
      CHECK(v >= 0.0);
      CHECK(v <= hi + 1e-12);
    }
    CHECK(disc.predict(one)[0] == doctest::Approx(hi).epsilon(1e-12));
  }
}

TEST_CASE("adversarial loop runs rounds and never selects round zero") {
  const auto& corpus = small_corpus();
  const auto data = make_training_set(ConditioningMode::kMelody, corpus, nullptr);
  const auto gcfg = gen_config(data, corpus);
  DiscriminatorConfig dcfg;
  dcfg.vocab = gcfg.lyric_vocab;
  dcfg.embedding_dim = 8;
  dcfg.feature_maps = 4;
  dcfg.hidden_dim = 8;
  const BleuReferencePool pool(data.validation_references(), 2);
  auto config = quick_config();
  config.pg_learning_rate = 1e-4;
  auto state = start_adversarial(Generator(gcfg, 7), Discriminator(dcfg, 8), data, pool, config);
  CHECK(state.gen_optimizer.config().learning_rate == 1e-4);
  std::vector<LogRecord> log;
  const auto rounds = adversarial_loop(state, data, pool, config, 2, [&](const LogRecord& r) { log.push_back(r); });
  REQUIRE(rounds.size() == 2);
  CHECK(rounds[0].round == 1);
  CHECK(state.best_round >= 1);
  CHECK(state.next_round == 3);
  CHECK(std::any_of(log.begin(), log.end(), [](const LogRecord& r) { return r.phase == "adv"; }));
  // Same seeds, same outcome.
  auto again = start_adversarial(Generator(gcfg, 7), Discriminator(dcfg, 8), data, pool, config);
  const auto rounds2 = adversarial_loop(again, data, pool, config, 2);
  CHECK(rounds2[1].bleu2 == rounds[1].bleu2);
  CHECK(rounds2[1].pg_loss == rounds[1].pg_loss);
}
