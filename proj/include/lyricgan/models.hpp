#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lyricgan/corpus.hpp"
#include "lyricgan/nn/ops.hpp"
#include "lyricgan/nn/tensor.hpp"

namespace lyricgan {

enum class ConditioningMode { kNone, kMelody, kMelodyTheme };

std::string to_string(ConditioningMode mode);
/// Accepts "none", "mc", "tmc".
ConditioningMode parse_mode(const std::string& text);
inline bool uses_melody(ConditioningMode m) { return m != ConditioningMode::kNone; }
inline bool uses_theme(ConditioningMode m) { return m == ConditioningMode::kMelodyTheme; }

struct GeneratorConfig {
  ConditioningMode mode = ConditioningMode::kNone;
  std::size_t lyric_vocab = 0;
  std::size_t melody_vocab = 0;
  std::size_t embedding_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t theme_dim = 0;  // word-vector dimension, themed mode only

  std::size_t lstm_input_dim() const {
    return uses_melody(mode) ? 2 * embedding_dim : embedding_dim;
  }
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Closed-form trainable parameter count of a generator.
std::size_t generator_parameter_count(const GeneratorConfig& config);

/// Per-row conditioning for sampling. `melody` is an encoded note row
/// (<START> notes <END> <PAD>...) and `theme` a word-vector-space theme embedding.
struct GenerationContext {
  std::vector<int> melody;
  std::vector<double> theme;
};

/// LSTM language model over syllables, optionally fed the next melody note
/// (embeddings concatenated) and a theme projected into the initial hidden state.
///
/// Parameter order (also the checkpoint order): lyric_embedding,
/// [melody_embedding], [theme_weight, theme_bias], lstm.w_input, lstm.w_hidden,
/// lstm.bias, output_weight, output_bias.
class Generator {
 public:
  Generator() = default;
  Generator(GeneratorConfig config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  /// Teacher-forced log-probabilities, B x (steps - 1) x V. Position t predicts
  /// token t + 1 from lyric t and (conditioned modes) note t + 1.
  nn::Tensor forward(const EncodedBatch& batch, const nn::Tensor* themes = nullptr) const;

  /// sum_{b,t} weight[b,t] * -log p(token_{b,t+1}) / normalizer, weights laid out
  /// B x (steps - 1). Gradients are accumulated into the parameters when asked.
  double weighted_nll(const EncodedBatch& batch, const nn::Tensor* themes,
                      std::span<const double> weights, double normalizer, bool accumulate_grad);

  /// Per-token cross entropy over non-<PAD> targets.
  double mle_loss(const EncodedBatch& batch, const nn::Tensor* themes, bool accumulate_grad);

  /// -sum_t reward_t log G(y_t | s_t), averaged over rows; rewards B x (steps - 1),
  /// ignored beyond each row's <END>.
  double policy_gradient_loss(const EncodedBatch& batch, const nn::Tensor* themes,
                              std::span<const double> rewards, bool accumulate_grad);

  /// Hidden states before each input position: entry t is the state after
  /// consuming tokens 0..t-1, for t = 0..steps-1.
  std::vector<nn::LstmState> teacher_states(const EncodedBatch& batch,
                                            const nn::Tensor* themes) const;

  /// One lyric row per context: <START> syllables <END> <PAD>..., max_len long.
  std::vector<std::vector<int>> sample(const std::vector<GenerationContext>& contexts,
                                       std::size_t max_len, std::mt19937_64& rng,
                                       double temperature = 1.0) const;

  /// A partially generated row: tokens[0..position] are fixed, position is the
  /// index of the last fixed token, and `state` precedes consuming it.
  struct PartialRow {
    std::vector<int> tokens;
    std::size_t position = 0;
    std::size_t context = 0;
    nn::LstmState state;
  };

  /// Samples every row to completion in place (rows already ending in <END> are left as is).
  void complete(std::vector<PartialRow>& rows, const std::vector<GenerationContext>& contexts,
                std::mt19937_64& rng, double temperature = 1.0) const;

  /// Initial LSTM state for each context.
  nn::LstmState initial_state(const std::vector<GenerationContext>& contexts) const;
  nn::LstmState initial_state(std::size_t batch, const nn::Tensor* themes) const;

  /// Next-token distribution (softmax, not masked) for each partial row.
  nn::Tensor next_token_log_probs(const std::vector<PartialRow>& rows,
                                  const std::vector<GenerationContext>& contexts) const;

  static constexpr int kMelodyExhausted = kPad;

 private:
  struct StepCache;

  nn::Tensor step_input(std::span<const int> lyric_ids, std::span<const int> note_ids) const;
  void check_inputs(std::size_t rows, const nn::Tensor* themes) const;

  GeneratorConfig config_;
  nn::Parameter lyric_embedding_;
  nn::Parameter melody_embedding_;
  nn::Parameter theme_weight_;
  nn::Parameter theme_bias_;
  nn::LstmCell lstm_;
  nn::Parameter output_weight_;
  nn::Parameter output_bias_;
};

/// Stacks per-row theme vectors into a B x D tensor.
nn::Tensor stack_themes(const std::vector<std::vector<double>>& rows);

struct DiscriminatorConfig {
  std::size_t vocab = 0;
  std::size_t embedding_dim = 128;
  std::vector<std::size_t> filter_widths = {2, 3, 4, 5};
  std::size_t feature_maps = 64;
  std::size_t hidden_dim = 128;
  double dropout = 0.25;

  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

std::size_t discriminator_parameter_count(const DiscriminatorConfig& config);

/// Lyrics-only CNN classifier: embedding, conv banks with max-over-time,
/// dense + ReLU, dropout (training only), dense, sigmoid. Output is P(real).
///
/// Parameter order: embedding, conv banks by width (filter, bias), hidden_weight,
/// hidden_bias, output_weight, output_bias.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(DiscriminatorConfig config, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return config_; }
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  /// Probability that each row is real. Rows are right-padded to a common
  /// length of at least the widest filter. Evaluation mode.
  std::vector<double> predict(const std::vector<std::vector<int>>& rows) const;

  /// Mean binary cross-entropy (label 1 = real) in training mode; dropout masks
  /// come from `rng`. Gradients accumulated when asked.
  double loss(const std::vector<std::vector<int>>& rows, std::span<const double> labels,
              std::mt19937_64& rng, bool accumulate_grad, bool train_mode = true);

 private:
  struct Activations;
  Activations run(const std::vector<std::vector<int>>& rows, std::mt19937_64* dropout_rng) const;

  DiscriminatorConfig config_;
  nn::Parameter embedding_;
  std::vector<nn::ConvBank> banks_;
  nn::Parameter hidden_weight_;
  nn::Parameter hidden_bias_;
  nn::Parameter output_weight_;
  nn::Parameter output_bias_;
};

}  // namespace lyricgan
