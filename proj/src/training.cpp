#include "lyricgan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lyricgan/log.hpp"

namespace lyricgan {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

constexpr std::size_t kPredictChunk = 512;

std::vector<double> predict_chunked(const Discriminator& disc,
                                    const std::vector<std::vector<int>>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t begin = 0; begin < rows.size(); begin += kPredictChunk) {
    const std::size_t end = std::min(rows.size(), begin + kPredictChunk);
    const std::vector<std::vector<int>> chunk(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                              rows.begin() + static_cast<std::ptrdiff_t>(end));
    const auto scores = disc.predict(chunk);
    out.insert(out.end(), scores.begin(), scores.end());
  }
  return out;
}

std::size_t end_position(const std::vector<int>& row) {
  const auto it = std::find(row.begin(), row.end(), kEnd);
  if (it == row.end()) throw std::invalid_argument("generated row has no <END>");
  return static_cast<std::size_t>(it - row.begin());
}

void require_finite(double loss, std::span<nn::Parameter* const> params, const std::string& where) {
  if (!std::isfinite(loss)) throw TrainingAborted("non-finite loss in " + where);
  if (!nn::grads_finite(params)) throw TrainingAborted("non-finite gradient in " + where);
}

std::vector<EncodedRow> pick_rows(const std::vector<EncodedRow>& rows,
                                  std::span<const std::size_t> order, std::size_t begin,
                                  std::size_t end) {
  std::vector<EncodedRow> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(rows[order[i]]);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be at least 1");
  };
  positive(mle_epochs, "mle_epochs");
  positive(disc_epochs, "disc_epochs");
  positive(adversarial_rounds, "adversarial_rounds");
  positive(pg_batches, "pg_batches");
  positive(batch_size, "batch_size");
  positive(rollouts, "rollouts");
  positive(bleu_lines, "bleu_lines");
  positive(reference_cap, "reference_cap");
  if (!(adam.learning_rate > 0)) throw std::invalid_argument("adam learning rate must be positive");
  if (!(adagrad.learning_rate > 0)) {
    throw std::invalid_argument("adagrad learning rate must be positive");
  }
  if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be positive");
  if (!(baseline_decay >= 0 && baseline_decay < 1)) {
    throw std::invalid_argument("baseline_decay must be in [0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"mle_epochs", mle_epochs},
          {"disc_epochs", disc_epochs},
          {"adversarial_rounds", adversarial_rounds},
          {"pg_batches", pg_batches},
          {"batch_size", batch_size},
          {"adam", {{"learning_rate", adam.learning_rate},
                    {"beta1", adam.beta1},
                    {"beta2", adam.beta2},
                    {"epsilon", adam.epsilon}}},
          {"adagrad", {{"learning_rate", adagrad.learning_rate}, {"epsilon", adagrad.epsilon}}},
          {"pg_learning_rate", pg_learning_rate},
          {"rollouts", rollouts},
          {"clip_norm", clip_norm},
          {"reward_baseline", reward_baseline},
          {"baseline_decay", baseline_decay},
          {"bleu_lines", bleu_lines},
          {"reference_cap", reference_cap},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mle_epochs = j.value("mle_epochs", c.mle_epochs);
  c.disc_epochs = j.value("disc_epochs", c.disc_epochs);
  c.adversarial_rounds = j.value("adversarial_rounds", c.adversarial_rounds);
  c.pg_batches = j.value("pg_batches", c.pg_batches);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("adam")) {
    const auto& a = j["adam"];
    c.adam.learning_rate = a.value("learning_rate", c.adam.learning_rate);
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
  }
  if (j.contains("adagrad")) {
    const auto& a = j["adagrad"];
    c.adagrad.learning_rate = a.value("learning_rate", c.adagrad.learning_rate);
    c.adagrad.epsilon = a.value("epsilon", c.adagrad.epsilon);
  }
  c.pg_learning_rate = j.value("pg_learning_rate", c.pg_learning_rate);
  c.rollouts = j.value("rollouts", c.rollouts);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.reward_baseline = j.value("reward_baseline", c.reward_baseline);
  c.baseline_decay = j.value("baseline_decay", c.baseline_decay);
  c.bleu_lines = j.value("bleu_lines", c.bleu_lines);
  c.reference_cap = j.value("reference_cap", c.reference_cap);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

GenerationContext TrainingSet::context(const EncodedRow& row) const {
  GenerationContext ctx;
  if (uses_melody(mode)) ctx.melody = row.notes;
  if (uses_theme(mode)) {
    if (row.theme >= 0) {
      if (static_cast<std::size_t>(row.theme) >= theme_vectors.size()) {
        throw std::invalid_argument("row theme " + std::to_string(row.theme) +
                                    " has no theme vector");
      }
      ctx.theme = theme_vectors[static_cast<std::size_t>(row.theme)];
    }
  }
  return ctx;
}

std::vector<GenerationContext> TrainingSet::contexts(const std::vector<EncodedRow>& rows) const {
  std::vector<GenerationContext> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(context(r));
  return out;
}

std::vector<std::vector<int>> TrainingSet::validation_references() const {
  std::vector<std::vector<int>> out;
  out.reserve(valid.size());
  for (const auto& r : valid) out.push_back(content_ids(r.lyrics));
  return out;
}

std::optional<nn::Tensor> context_themes(const Generator& gen,
                                         const std::vector<GenerationContext>& contexts) {
  if (!uses_theme(gen.config().mode)) return std::nullopt;
  const std::size_t dim = gen.config().theme_dim;
  nn::Tensor themes({contexts.size(), dim});
  for (std::size_t b = 0; b < contexts.size(); ++b) {
    const auto& t = contexts[b].theme;
    if (t.empty()) continue;
    if (t.size() != dim) throw std::invalid_argument("theme vector dimension mismatch");
    std::copy(t.begin(), t.end(), themes.data() + b * dim);
  }
  return themes;
}

EncodedBatch sequence_batch(const std::vector<std::vector<int>>& sequences,
                            const std::vector<GenerationContext>& contexts, std::size_t max_len) {
  if (sequences.size() != contexts.size()) {
    throw std::invalid_argument("one context per sequence required");
  }
  EncodedBatch batch;
  batch.rows = sequences.size();
  batch.steps = max_len;
  batch.lyrics.assign(batch.rows * max_len, kPad);
  batch.notes.assign(batch.rows * max_len, kPad);
  for (std::size_t b = 0; b < batch.rows; ++b) {
    const auto& seq = sequences[b];
    if (seq.size() != max_len) throw std::invalid_argument("sequence length differs from max_len");
    std::copy(seq.begin(), seq.end(), batch.lyrics.begin() + static_cast<std::ptrdiff_t>(b * max_len));
    const auto& melody = contexts[b].melody;
    std::copy_n(melody.begin(), std::min(melody.size(), max_len),
                batch.notes.begin() + static_cast<std::ptrdiff_t>(b * max_len));
    batch.lengths.push_back(static_cast<int>(end_position(seq) + 1));
    batch.themes.push_back(-1);
  }
  return batch;
}

nlohmann::json LogRecord::to_json() const {
  nlohmann::json j;
  j["phase"] = phase;
  j[phase == "adv" ? "round" : "epoch"] = index;
  j["loss"] = loss;
  j["bleu2"] = bleu2 ? nlohmann::json(*bleu2) : nlohmann::json(nullptr);
  j["disc_f1"] = disc_f1 ? nlohmann::json(*disc_f1) : nlohmann::json(nullptr);
  j["wall_ms"] = wall_ms;
  return j;
}

double mle_step(Generator& gen, nn::Adam& optimizer, const EncodedBatch& batch,
                const nn::Tensor* themes, double clip_norm) {
  const auto params = gen.parameters();
  nn::zero_grads(params);
  const double loss = gen.mle_loss(batch, themes, true);
  require_finite(loss, params, "MLE step");
  nn::clip_grad_norm(params, clip_norm);
  optimizer.step(params);
  return loss;
}

double validation_loss(const Generator& gen, const TrainingSet& data, std::size_t batch_size) {
  if (data.valid.empty()) throw std::invalid_argument("validation split is empty");
  double nll = 0.0;
  double tokens = 0.0;
  for (std::size_t begin = 0; begin < data.valid.size(); begin += batch_size) {
    const std::size_t end = std::min(data.valid.size(), begin + batch_size);
    const std::vector<EncodedRow> rows(data.valid.begin() + static_cast<std::ptrdiff_t>(begin),
                                       data.valid.begin() + static_cast<std::ptrdiff_t>(end));
    const auto batch = make_batch(rows, data.max_len);
    const auto themes = context_themes(gen, data.contexts(rows));
    const auto log_probs = gen.forward(batch, themes ? &*themes : nullptr);
    for (std::size_t b = 0; b < batch.rows; ++b) {
      for (std::size_t t = 0; t + 1 < static_cast<std::size_t>(batch.lengths[b]); ++t) {
        nll -= log_probs(b, t, static_cast<std::size_t>(batch.lyric(b, t + 1)));
        tokens += 1.0;
      }
    }
  }
  return nll / tokens;
}

std::vector<double> mle_pretrain(Generator& gen, nn::Adam& optimizer, const TrainingSet& data,
                                 const TrainConfig& config, std::mt19937_64& rng,
                                 const LogSink& log) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("training split is empty");
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> curve;
  for (std::size_t epoch = 1; epoch <= config.mle_epochs; ++epoch) {
    const auto started = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const auto rows = pick_rows(data.train, order, begin, end);
      const auto batch = make_batch(rows, data.max_len);
      const auto themes = context_themes(gen, data.contexts(rows));
      try {
        total += mle_step(gen, optimizer, batch, themes ? &*themes : nullptr, config.clip_norm);
      } catch (const TrainingAborted& e) {
        throw TrainingAborted(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batches) + ")");
      }
      ++batches;
    }
    curve.push_back(total / static_cast<double>(batches));
    log::info("mle epoch " + std::to_string(epoch) + " loss " +
                                     std::to_string(curve.back()));
    if (log) log({"mle", epoch, curve.back(), std::nullopt, std::nullopt, elapsed_ms(started)});
  }
  return curve;
}

std::vector<std::vector<int>> mc_rollout(const Generator& policy,
                                         const Generator::PartialRow& prefix,
                                         const std::vector<GenerationContext>& contexts,
                                         std::size_t rollouts, std::mt19937_64& rng) {
  std::vector<Generator::PartialRow> rows(rollouts, prefix);
  policy.complete(rows, contexts, rng);
  std::vector<std::vector<int>> out;
  out.reserve(rollouts);
  for (auto& r : rows) out.push_back(std::move(r.tokens));
  return out;
}

std::vector<double> compute_rewards(const Generator& policy, const Discriminator& disc,
                                    const std::vector<std::vector<int>>& sequences,
                                    const std::vector<GenerationContext>& contexts,
                                    std::size_t rollouts, std::mt19937_64& rng) {
  if (sequences.empty()) return {};
  if (rollouts == 0) throw std::invalid_argument("rollout count must be positive");
  const std::size_t max_len = sequences.front().size();
  const std::size_t width = max_len - 1;
  const std::size_t hidden = policy.config().hidden_dim;
  const auto batch = sequence_batch(sequences, contexts, max_len);
  const auto themes = context_themes(policy, contexts);
  const auto states = policy.teacher_states(batch, themes ? &*themes : nullptr);

  // Every (row, prefix end) pair below the row's <END> is rolled out R times.
  struct Slot {
    std::size_t row;
    std::size_t target;  // reward index
  };
  std::vector<Slot> slots;
  std::vector<Generator::PartialRow> partial;
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const std::size_t end = static_cast<std::size_t>(batch.lengths[b]) - 1;
    for (std::size_t p = 1; p < end; ++p) {
      Generator::PartialRow prefix;
      prefix.tokens.assign(max_len, kPad);
      std::copy_n(sequences[b].begin(), p + 1, prefix.tokens.begin());
      prefix.position = p;
      prefix.context = b;
      prefix.state.h = nn::Tensor({1, hidden}, std::vector<double>(
                                                   states[p].h.data() + b * hidden,
                                                   states[p].h.data() + (b + 1) * hidden));
      prefix.state.c = nn::Tensor({1, hidden}, std::vector<double>(
                                                   states[p].c.data() + b * hidden,
                                                   states[p].c.data() + (b + 1) * hidden));
      slots.push_back({b, p - 1});
      for (std::size_t r = 0; r < rollouts; ++r) partial.push_back(prefix);
    }
  }
  policy.complete(partial, contexts, rng);
  std::vector<std::vector<int>> completed;
  completed.reserve(partial.size());
  for (auto& r : partial) completed.push_back(std::move(r.tokens));
  const auto rollout_scores = predict_chunked(disc, completed);
  const auto final_scores = predict_chunked(disc, sequences);

  std::vector<double> rewards(sequences.size() * width, 0.0);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rollouts; ++r) sum += rollout_scores[s * rollouts + r];
    rewards[slots[s].row * width + slots[s].target] = sum / static_cast<double>(rollouts);
  }
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const std::size_t end = static_cast<std::size_t>(batch.lengths[b]) - 1;
    rewards[b * width + end - 1] = final_scores[b];
  }
  return rewards;
}

double pg_step(Generator& gen, nn::Adam& optimizer, const EncodedBatch& batch,
               const nn::Tensor* themes, std::span<const double> rewards, double clip_norm) {
  const auto params = gen.parameters();
  nn::zero_grads(params);
  const double loss = gen.policy_gradient_loss(batch, themes, rewards, true);
  require_finite(loss, params, "policy-gradient step");
  nn::clip_grad_norm(params, clip_norm);
  optimizer.step(params);
  return loss;
}

DiscEpochResult disc_train_epoch(Discriminator& disc, nn::Adagrad& optimizer,
                                 const Generator& gen, const TrainingSet& data,
                                 const TrainConfig& config, std::mt19937_64& rng) {
  if (data.train.empty() || data.valid.empty()) {
    throw std::invalid_argument("discriminator training needs train and validation splits");
  }
  std::vector<std::vector<int>> rows;
  std::vector<double> labels;
  for (const auto& r : data.train) {
    rows.push_back(r.lyrics);
    labels.push_back(1.0);
  }
  for (auto& fake : gen.sample(data.contexts(data.train), data.max_len, rng)) {
    rows.push_back(std::move(fake));
    labels.push_back(0.0);
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto params = disc.parameters();
  DiscEpochResult result;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config.batch_size);
    std::vector<std::vector<int>> batch_rows;
    std::vector<double> batch_labels;
    for (std::size_t i = begin; i < end; ++i) {
      batch_rows.push_back(rows[order[i]]);
      batch_labels.push_back(labels[order[i]]);
    }
    nn::zero_grads(params);
    const double loss = disc.loss(batch_rows, batch_labels, rng, true);
    require_finite(loss, params, "discriminator step");
    nn::clip_grad_norm(params, config.clip_norm);
    optimizer.step(params);
    result.loss += loss;
    ++batches;
  }
  result.loss /= static_cast<double>(batches);

  std::vector<std::vector<int>> eval_rows;
  std::vector<bool> truth;
  for (const auto& r : data.valid) {
    eval_rows.push_back(r.lyrics);
    truth.push_back(true);
  }
  for (auto& fake : gen.sample(data.contexts(data.valid), data.max_len, rng)) {
    eval_rows.push_back(std::move(fake));
    truth.push_back(false);
  }
  const auto scores = predict_chunked(disc, eval_rows);
  std::vector<bool> predicted;
  for (double s : scores) predicted.push_back(s > 0.5);
  result.validation = prf1(predicted, truth);
  return result;
}

std::vector<DiscEpochResult> disc_pretrain(Discriminator& disc, nn::Adagrad& optimizer,
                                           const Generator& gen, const TrainingSet& data,
                                           const TrainConfig& config, std::mt19937_64& rng,
                                           const LogSink& log) {
  std::vector<DiscEpochResult> out;
  for (std::size_t epoch = 1; epoch <= config.disc_epochs; ++epoch) {
    const auto started = Clock::now();
    out.push_back(disc_train_epoch(disc, optimizer, gen, data, config, rng));
    log::info("disc epoch " + std::to_string(epoch) + " f1 " +
                                     std::to_string(out.back().validation.f1));
    if (log) {
      log({"disc", epoch, out.back().loss, std::nullopt, out.back().validation.f1,
           elapsed_ms(started)});
    }
  }
  return out;
}

double validation_bleu2(const Generator& gen, const TrainingSet& data,
                        const BleuReferencePool& pool, std::size_t lines, std::uint64_t seed) {
  if (data.valid.empty()) throw std::invalid_argument("validation split is empty");
  const std::size_t n = std::min(lines, data.valid.size());
  const std::vector<EncodedRow> rows(data.valid.begin(),
                                     data.valid.begin() + static_cast<std::ptrdiff_t>(n));
  std::mt19937_64 rng(seed);
  const auto samples = gen.sample(data.contexts(rows), data.max_len, rng);
  double total = 0.0;
  for (const auto& s : samples) total += pool.score(content_ids(s), 2);
  return total / static_cast<double>(n);
}

AdversarialState start_adversarial(Generator gen, Discriminator disc, const TrainingSet& data,
                                   const BleuReferencePool& pool, const TrainConfig& config) {
  config.validate();
  AdversarialState state;
  nn::AdamConfig pg = config.adam;
  if (config.pg_learning_rate > 0) pg.learning_rate = config.pg_learning_rate;
  state.gen_optimizer = nn::Adam(pg);
  state.disc_optimizer = nn::Adagrad(config.adagrad);
  state.rng.seed(config.seed ^ 0xad7e5a11ULL);
  state.mle_bleu2 = validation_bleu2(gen, data, pool, config.bleu_lines, config.seed);
  state.best = gen;
  state.gen = std::move(gen);
  state.disc = std::move(disc);
  return state;
}

std::vector<RoundResult> adversarial_loop(AdversarialState& state, const TrainingSet& data,
                                          const BleuReferencePool& pool,
                                          const TrainConfig& config, std::size_t rounds,
                                          const LogSink& log) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("training split is empty");
  std::vector<RoundResult> results;
  std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
  for (std::size_t k = 0; k < rounds; ++k) {
    const auto started = Clock::now();
    RoundResult res;
    res.round = state.next_round;
    const Generator rollout_policy = state.gen;
    try {
      for (std::size_t step = 0; step < config.pg_batches; ++step) {
        std::vector<EncodedRow> rows;
        for (std::size_t b = 0; b < config.batch_size; ++b) rows.push_back(data.train[pick(state.rng)]);
        const auto contexts = data.contexts(rows);
        const auto samples = state.gen.sample(contexts, data.max_len, state.rng);
        auto rewards = compute_rewards(rollout_policy, state.disc, samples, contexts,
                                       config.rollouts, state.rng);
        if (config.reward_baseline) {
          double sum = 0.0;
          std::size_t count = 0;
          for (double r : rewards) {
            if (r != 0.0) {
              sum += r;
              ++count;
            }
          }
          const double baseline = state.reward_mean;
          for (double& r : rewards) {
            if (r != 0.0) r -= baseline;
          }
          if (count > 0) {
            state.reward_mean = config.baseline_decay * state.reward_mean +
                                (1.0 - config.baseline_decay) * sum / static_cast<double>(count);
          }
        }
        const auto batch = sequence_batch(samples, contexts, data.max_len);
        const auto themes = context_themes(state.gen, contexts);
        res.pg_loss += pg_step(state.gen, state.gen_optimizer, batch, themes ? &*themes : nullptr,
                               rewards, config.clip_norm);
      }
      res.pg_loss /= static_cast<double>(config.pg_batches);
      const auto disc_result = disc_train_epoch(state.disc, state.disc_optimizer, state.gen, data,
                                                config, state.rng);
      res.disc_loss = disc_result.loss;
      res.disc_f1 = disc_result.validation.f1;
    } catch (const TrainingAborted& e) {
      throw TrainingAborted(std::string(e.what()) + " (adversarial round " +
                            std::to_string(res.round) + ")");
    }
    res.bleu2 = validation_bleu2(state.gen, data, pool, config.bleu_lines, config.seed);
    if (res.bleu2 > state.best_bleu2) {
      state.best_bleu2 = res.bleu2;
      state.best_round = res.round;
      state.best = state.gen;
    }
    log::info("adv round " + std::to_string(res.round) + " bleu2 " +
                                     std::to_string(res.bleu2) + " disc f1 " +
                                     std::to_string(res.disc_f1));
    if (log) log({"adv", res.round, res.pg_loss, res.bleu2, res.disc_f1, elapsed_ms(started)});
    results.push_back(res);
    state.next_round += 1;
  }
  return results;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 rng_from_state(const std::string& text) {
  std::istringstream in(text);
  std::mt19937_64 rng;
  in >> rng;
  if (!in) throw std::invalid_argument("malformed random engine state");
  return rng;
}

}  // namespace lyricgan
