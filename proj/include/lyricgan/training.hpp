#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lyricgan/corpus.hpp"
#include "lyricgan/eval.hpp"
#include "lyricgan/models.hpp"
#include "lyricgan/nn/optim.hpp"

namespace lyricgan {

struct TrainConfig {
  std::size_t mle_epochs = 120;
  std::size_t disc_epochs = 50;
  std::size_t adversarial_rounds = 50;
  std::size_t pg_batches = 10;  // generator mini-batches per round
  std::size_t batch_size = 32;
  nn::AdamConfig adam;
  /// Adam step size for policy-gradient updates; non-positive reuses adam.learning_rate.
  double pg_learning_rate = 0.0;
  nn::AdagradConfig adagrad;
  std::size_t rollouts = 16;
  double clip_norm = 5.0;
  bool reward_baseline = false;  // subtract a running mean of rewards
  double baseline_decay = 0.9;
  std::size_t bleu_lines = 200;        // validation lines generated per BLEU2 check
  std::size_t reference_cap = 5000;    // BLEU reference pool size
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Encoded splits plus whatever the generator needs to condition on.
struct TrainingSet {
  ConditioningMode mode = ConditioningMode::kNone;
  std::size_t max_len = 0;
  std::vector<EncodedRow> train;
  std::vector<EncodedRow> valid;
  /// Theme embedding per theme id; required in themed mode.
  std::vector<std::vector<double>> theme_vectors;

  /// Melody (conditioned modes) and theme (themed mode, zero when the row has none).
  GenerationContext context(const EncodedRow& row) const;
  std::vector<GenerationContext> contexts(const std::vector<EncodedRow>& rows) const;
  /// Content ids of every validation line.
  std::vector<std::vector<int>> validation_references() const;
};

/// B x theme_dim theme tensor for a themed generator, nullopt otherwise.
std::optional<nn::Tensor> context_themes(const Generator& gen,
                                         const std::vector<GenerationContext>& contexts);

/// Batch whose lyrics are the given token rows (each <START> ... <END> <PAD>...)
/// and whose notes are the contexts' melodies.
EncodedBatch sequence_batch(const std::vector<std::vector<int>>& sequences,
                            const std::vector<GenerationContext>& contexts, std::size_t max_len);

/// One line of the newline-delimited training log.
struct LogRecord {
  std::string phase;  // "mle", "disc", "adv"
  std::size_t index = 0;
  double loss = 0.0;
  std::optional<double> bleu2;
  std::optional<double> disc_f1;
  double wall_ms = 0.0;

  nlohmann::json to_json() const;
};

using LogSink = std::function<void(const LogRecord&)>;

/// Zero grads, loss, clip, one Adam step. Throws TrainingAborted on a non-finite loss or gradient.
double mle_step(Generator& gen, nn::Adam& optimizer, const EncodedBatch& batch,
                const nn::Tensor* themes, double clip_norm);

/// Mean per-token cross entropy on the validation split.
double validation_loss(const Generator& gen, const TrainingSet& data, std::size_t batch_size);

/// Shuffled mini-batch epochs over the training split. Returns the per-epoch mean loss.
std::vector<double> mle_pretrain(Generator& gen, nn::Adam& optimizer, const TrainingSet& data,
                                 const TrainConfig& config, std::mt19937_64& rng,
                                 const LogSink& log = {});

/// R independent completions of `prefix` under the rollout policy.
std::vector<std::vector<int>> mc_rollout(const Generator& policy,
                                         const Generator::PartialRow& prefix,
                                         const std::vector<GenerationContext>& contexts,
                                         std::size_t rollouts, std::mt19937_64& rng);

/// Reward for each generated token, laid out B x (max_len - 1) like the
/// generator's targets: position t scores token t + 1. Intermediate tokens get
/// the mean discriminator score over R rollouts of the prefix; the final token
/// (<END>) gets the score of the sequence itself. Zero beyond <END>.
std::vector<double> compute_rewards(const Generator& policy, const Discriminator& disc,
                                    const std::vector<std::vector<int>>& sequences,
                                    const std::vector<GenerationContext>& contexts,
                                    std::size_t rollouts, std::mt19937_64& rng);

/// Policy-gradient loss, clip and one Adam step.
double pg_step(Generator& gen, nn::Adam& optimizer, const EncodedBatch& batch,
               const nn::Tensor* themes, std::span<const double> rewards, double clip_norm);

struct DiscEpochResult {
  double loss = 0.0;
  Prf1 validation;
};

/// One balanced real/fake epoch over the training split, then P/R/F1 (real =
/// positive) on validation lines against fresh generator samples.
DiscEpochResult disc_train_epoch(Discriminator& disc, nn::Adagrad& optimizer,
                                 const Generator& gen, const TrainingSet& data,
                                 const TrainConfig& config, std::mt19937_64& rng);

std::vector<DiscEpochResult> disc_pretrain(Discriminator& disc, nn::Adagrad& optimizer,
                                           const Generator& gen, const TrainingSet& data,
                                           const TrainConfig& config, std::mt19937_64& rng,
                                           const LogSink& log = {});

/// Mean BLEU2 of one generated line per leading validation context. The
/// sampling seed is fixed so successive checks are comparable.
double validation_bleu2(const Generator& gen, const TrainingSet& data,
                        const BleuReferencePool& pool, std::size_t lines, std::uint64_t seed);

/// Everything the adversarial loop mutates; copyable so a run can be snapshotted.
struct AdversarialState {
  Generator gen;
  Discriminator disc;
  nn::Adam gen_optimizer;
  nn::Adagrad disc_optimizer;
  std::mt19937_64 rng;
  std::size_t next_round = 1;
  double mle_bleu2 = 0.0;
  double best_bleu2 = -std::numeric_limits<double>::infinity();
  std::size_t best_round = 0;
  Generator best;
  double reward_mean = 0.0;  // running baseline
};

struct RoundResult {
  std::size_t round = 0;
  double pg_loss = 0.0;
  double disc_loss = 0.0;
  double disc_f1 = 0.0;
  double bleu2 = 0.0;
};

/// Creates the loop state and scores the MLE generator (round 0, never selected as best).
AdversarialState start_adversarial(Generator gen, Discriminator disc, const TrainingSet& data,
                                   const BleuReferencePool& pool, const TrainConfig& config);

/// Runs `rounds` rounds: sync rollout policy, pg_batches policy-gradient
/// steps on samples conditioned on uniformly drawn training contexts, one
/// discriminator epoch, validation BLEU2 and best-generator tracking.
std::vector<RoundResult> adversarial_loop(AdversarialState& state, const TrainingSet& data,
                                          const BleuReferencePool& pool,
                                          const TrainConfig& config, std::size_t rounds,
                                          const LogSink& log = {});

std::string rng_state(const std::mt19937_64& rng);
std::mt19937_64 rng_from_state(const std::string& text);

}  // namespace lyricgan
