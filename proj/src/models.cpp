#include "lyricgan/models.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lyricgan {

namespace {

using nn::LstmState;
using nn::Parameter;
using nn::Tensor;

void init_all(std::vector<Parameter*> params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (Parameter* p : params) nn::init_uniform(*p, rng, 0.1);
}

Tensor gather_rows(const Tensor& source, std::span<const std::size_t> rows) {
  const std::size_t width = source.dim(1);
  Tensor out({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(source.data() + rows[i] * width, width, out.data() + i * width);
  }
  return out;
}

}  // namespace

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::kNone:
      return "none";
    case ConditioningMode::kMelody:
      return "mc";
    case ConditioningMode::kMelodyTheme:
      return "tmc";
  }
  return "none";
}

ConditioningMode parse_mode(const std::string& text) {
  if (text == "none") return ConditioningMode::kNone;
  if (text == "mc") return ConditioningMode::kMelody;
  if (text == "tmc") return ConditioningMode::kMelodyTheme;
  throw std::invalid_argument("unknown conditioning mode '" + text + "' (expected none|mc|tmc)");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"mode", to_string(mode)},           {"lyric_vocab", lyric_vocab},
          {"melody_vocab", melody_vocab},      {"embedding_dim", embedding_dim},
          {"hidden_dim", hidden_dim},          {"theme_dim", theme_dim}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.lyric_vocab = j.at("lyric_vocab").get<std::size_t>();
  c.melody_vocab = j.at("melody_vocab").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.theme_dim = j.at("theme_dim").get<std::size_t>();
  return c;
}

std::size_t generator_parameter_count(const GeneratorConfig& c) {
  const std::size_t h = c.hidden_dim;
  std::size_t n = c.lyric_vocab * c.embedding_dim;
  if (uses_melody(c.mode)) n += c.melody_vocab * c.embedding_dim;
  if (uses_theme(c.mode)) n += c.theme_dim * h + h;
  n += 4 * h * c.lstm_input_dim() + 4 * h * h + 4 * h;
  n += h * c.lyric_vocab + c.lyric_vocab;
  return n;
}

Generator::Generator(GeneratorConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      lyric_embedding_("lyric_embedding", {config_.lyric_vocab, config_.embedding_dim}),
      lstm_(config_.lstm_input_dim(), config_.hidden_dim),
      output_weight_("output_weight", {config_.hidden_dim, config_.lyric_vocab}),
      output_bias_("output_bias", {config_.lyric_vocab}) {
  if (config_.lyric_vocab <= kNumSpecials) {
    throw std::invalid_argument("generator needs a lyric vocabulary beyond the specials");
  }
  if (uses_melody(config_.mode)) {
    if (config_.melody_vocab <= kNumSpecials) {
      throw std::invalid_argument("melody-conditioned generator needs a note vocabulary");
    }
    melody_embedding_ = Parameter("melody_embedding", {config_.melody_vocab, config_.embedding_dim});
  }
  if (uses_theme(config_.mode)) {
    if (config_.theme_dim == 0) throw std::invalid_argument("themed generator needs theme_dim > 0");
    theme_weight_ = Parameter("theme_weight", {config_.theme_dim, config_.hidden_dim});
    theme_bias_ = Parameter("theme_bias", {config_.hidden_dim});
  }
  std::vector<Parameter*> to_init;
  for (Parameter* p : parameters()) {
    if (p != &theme_bias_) to_init.push_back(p);
  }
  init_all(to_init, seed);
}

std::vector<Parameter*> Generator::parameters() {
  std::vector<Parameter*> out{&lyric_embedding_};
  if (uses_melody(config_.mode)) out.push_back(&melody_embedding_);
  if (uses_theme(config_.mode)) {
    out.push_back(&theme_weight_);
    out.push_back(&theme_bias_);
  }
  out.insert(out.end(), {&lstm_.w_input, &lstm_.w_hidden, &lstm_.bias, &output_weight_,
                         &output_bias_});
  return out;
}

std::vector<const Parameter*> Generator::parameters() const {
  auto mutable_params = const_cast<Generator*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Generator::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

void Generator::check_inputs(std::size_t rows, const Tensor* themes) const {
  if (uses_theme(config_.mode)) {
    if (themes == nullptr) throw std::invalid_argument("themed generator requires theme vectors");
    nn::require_shape(*themes, {rows, config_.theme_dim}, "theme vectors");
  } else if (themes != nullptr) {
    throw std::invalid_argument("theme vectors given to a generator in mode " +
                                to_string(config_.mode));
  }
}

Tensor Generator::step_input(std::span<const int> lyric_ids, std::span<const int> note_ids) const {
  Tensor lyric = nn::embedding_lookup(lyric_embedding_, lyric_ids);
  if (!uses_melody(config_.mode)) return lyric;
  Tensor melody = nn::embedding_lookup(melody_embedding_, note_ids);
  const std::size_t rows = lyric_ids.size();
  const std::size_t e = config_.embedding_dim;
  Tensor x({rows, 2 * e});
  for (std::size_t b = 0; b < rows; ++b) {
    std::copy_n(lyric.data() + b * e, e, x.data() + b * 2 * e);
    std::copy_n(melody.data() + b * e, e, x.data() + b * 2 * e + e);
  }
  return x;
}

LstmState Generator::initial_state(std::size_t batch, const Tensor* themes) const {
  LstmState s{Tensor({batch, config_.hidden_dim}), Tensor({batch, config_.hidden_dim})};
  if (uses_theme(config_.mode) && themes != nullptr) {
    s.h = nn::affine(*themes, theme_weight_, theme_bias_);
  }
  return s;
}

LstmState Generator::initial_state(const std::vector<GenerationContext>& contexts) const {
  if (!uses_theme(config_.mode)) {
    for (const auto& ctx : contexts) {
      if (!ctx.theme.empty()) {
        throw std::invalid_argument("theme given to a generator in mode " + to_string(config_.mode));
      }
    }
    return initial_state(contexts.size(), nullptr);
  }
  Tensor themes({contexts.size(), config_.theme_dim});
  for (std::size_t b = 0; b < contexts.size(); ++b) {
    const auto& theme = contexts[b].theme;
    if (theme.empty()) continue;  // unthemed request: zero vector
    if (theme.size() != config_.theme_dim) {
      throw std::invalid_argument("theme vector has dimension " + std::to_string(theme.size()) +
                                  ", expected " + std::to_string(config_.theme_dim));
    }
    std::copy(theme.begin(), theme.end(), themes.data() + b * config_.theme_dim);
  }
  return initial_state(contexts.size(), &themes);
}

Tensor Generator::forward(const EncodedBatch& batch, const Tensor* themes) const {
  check_inputs(batch.rows, themes);
  const std::size_t steps = batch.steps - 1;
  const std::size_t vocab = config_.lyric_vocab;
  Tensor out({batch.rows, steps, vocab});
  LstmState state = initial_state(batch.rows, themes);
  std::vector<int> lyric_ids(batch.rows);
  std::vector<int> note_ids(batch.rows);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch.rows; ++b) {
      lyric_ids[b] = batch.lyric(b, t);
      note_ids[b] = batch.note(b, t + 1);
    }
    state = nn::lstm_step(lstm_, step_input(lyric_ids, note_ids), state.h, state.c);
    const Tensor log_probs = nn::log_softmax(nn::affine(state.h, output_weight_, output_bias_));
    for (std::size_t b = 0; b < batch.rows; ++b) {
      std::copy_n(log_probs.data() + b * vocab, vocab, &out(b, t, 0));
    }
  }
  return out;
}

struct Generator::StepCache {
  std::vector<int> lyric_ids;
  std::vector<int> note_ids;
  nn::LstmStepCache lstm;
  Tensor h;
  Tensor log_probs;
};

double Generator::weighted_nll(const EncodedBatch& batch, const Tensor* themes,
                               std::span<const double> weights, double normalizer,
                               bool accumulate_grad) {
  check_inputs(batch.rows, themes);
  const std::size_t width = batch.steps - 1;
  if (weights.size() != batch.rows * width) {
    throw std::invalid_argument("weights must be rows x (steps - 1)");
  }
  if (!(normalizer > 0.0)) throw std::invalid_argument("normalizer must be positive");
  std::size_t steps = 0;
  for (std::size_t b = 0; b < batch.rows; ++b) {
    for (std::size_t t = 0; t < width; ++t) {
      if (weights[b * width + t] != 0.0) steps = std::max(steps, t + 1);
    }
  }

  const std::size_t vocab = config_.lyric_vocab;
  std::vector<StepCache> caches(steps);
  LstmState state = initial_state(batch.rows, themes);
  double loss = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    auto& cache = caches[t];
    cache.lyric_ids.resize(batch.rows);
    cache.note_ids.resize(batch.rows);
    for (std::size_t b = 0; b < batch.rows; ++b) {
      cache.lyric_ids[b] = batch.lyric(b, t);
      cache.note_ids[b] = batch.note(b, t + 1);
    }
    state = nn::lstm_step(lstm_, step_input(cache.lyric_ids, cache.note_ids), state.h, state.c,
                          &cache.lstm);
    cache.h = state.h;
    cache.log_probs = nn::log_softmax(nn::affine(state.h, output_weight_, output_bias_));
    for (std::size_t b = 0; b < batch.rows; ++b) {
      const double w = weights[b * width + t];
      if (w == 0.0) continue;
      const auto target = static_cast<std::size_t>(batch.lyric(b, t + 1));
      loss -= w * cache.log_probs(b, target);
    }
  }
  loss /= normalizer;
  if (!accumulate_grad) return loss;

  Tensor dh_next({batch.rows, config_.hidden_dim});
  Tensor dc_next({batch.rows, config_.hidden_dim});
  const std::size_t e = config_.embedding_dim;
  for (std::size_t t = steps; t-- > 0;) {
    auto& cache = caches[t];
    Tensor dlog({batch.rows, vocab});
    for (std::size_t b = 0; b < batch.rows; ++b) {
      const double w = weights[b * width + t];
      if (w == 0.0) continue;
      dlog(b, static_cast<std::size_t>(batch.lyric(b, t + 1))) = -w / normalizer;
    }
    const Tensor dlogits = nn::log_softmax_backward(cache.log_probs, dlog);
    Tensor dh = nn::affine_backward(cache.h, output_weight_, output_bias_, dlogits);
    dh.as_matrix() += dh_next.as_matrix();
    auto grads = nn::lstm_step_backward(lstm_, cache.lstm, dh, dc_next);
    if (uses_melody(config_.mode)) {
      Tensor d_lyric({batch.rows, e});
      Tensor d_melody({batch.rows, e});
      for (std::size_t b = 0; b < batch.rows; ++b) {
        std::copy_n(grads.dx.data() + b * 2 * e, e, d_lyric.data() + b * e);
        std::copy_n(grads.dx.data() + b * 2 * e + e, e, d_melody.data() + b * e);
      }
      nn::embedding_backward(lyric_embedding_, cache.lyric_ids, d_lyric);
      nn::embedding_backward(melody_embedding_, cache.note_ids, d_melody);
    } else {
      nn::embedding_backward(lyric_embedding_, cache.lyric_ids, grads.dx);
    }
    dh_next = std::move(grads.dh_prev);
    dc_next = std::move(grads.dc_prev);
  }
  if (uses_theme(config_.mode)) nn::affine_backward(*themes, theme_weight_, theme_bias_, dh_next);
  return loss;
}

double Generator::mle_loss(const EncodedBatch& batch, const Tensor* themes, bool accumulate_grad) {
  const std::size_t width = batch.steps - 1;
  std::vector<double> weights(batch.rows * width, 0.0);
  double count = 0.0;
  for (std::size_t b = 0; b < batch.rows; ++b) {
    for (std::size_t t = 0; t + 1 < static_cast<std::size_t>(batch.lengths[b]); ++t) {
      weights[b * width + t] = 1.0;
      count += 1.0;
    }
  }
  return weighted_nll(batch, themes, weights, count, accumulate_grad);
}

double Generator::policy_gradient_loss(const EncodedBatch& batch, const Tensor* themes,
                                       std::span<const double> rewards, bool accumulate_grad) {
  const std::size_t width = batch.steps - 1;
  if (rewards.size() != batch.rows * width) {
    throw std::invalid_argument("rewards must be rows x (steps - 1)");
  }
  std::vector<double> weights(batch.rows * width, 0.0);
  for (std::size_t b = 0; b < batch.rows; ++b) {
    for (std::size_t t = 0; t + 1 < static_cast<std::size_t>(batch.lengths[b]); ++t) {
      weights[b * width + t] = rewards[b * width + t];
    }
  }
  return weighted_nll(batch, themes, weights, static_cast<double>(batch.rows), accumulate_grad);
}

std::vector<LstmState> Generator::teacher_states(const EncodedBatch& batch,
                                                 const Tensor* themes) const {
  check_inputs(batch.rows, themes);
  std::vector<LstmState> states;
  states.reserve(batch.steps);
  states.push_back(initial_state(batch.rows, themes));
  std::vector<int> lyric_ids(batch.rows);
  std::vector<int> note_ids(batch.rows);
  for (std::size_t t = 0; t + 1 < batch.steps; ++t) {
    for (std::size_t b = 0; b < batch.rows; ++b) {
      lyric_ids[b] = batch.lyric(b, t);
      note_ids[b] = batch.note(b, t + 1);
    }
    const auto& prev = states.back();
    states.push_back(nn::lstm_step(lstm_, step_input(lyric_ids, note_ids), prev.h, prev.c));
  }
  return states;
}

std::vector<std::vector<int>> Generator::sample(const std::vector<GenerationContext>& contexts,
                                                std::size_t max_len, std::mt19937_64& rng,
                                                double temperature) const {
  if (max_len < 3) throw std::invalid_argument("max_len must leave room for one syllable");
  const LstmState init = initial_state(contexts);
  std::vector<PartialRow> rows(contexts.size());
  for (std::size_t b = 0; b < contexts.size(); ++b) {
    rows[b].tokens.assign(max_len, kPad);
    rows[b].tokens[0] = kStart;
    rows[b].position = 0;
    rows[b].context = b;
    const std::array<std::size_t, 1> index{b};
    rows[b].state = {gather_rows(init.h, index), gather_rows(init.c, index)};
  }
  complete(rows, contexts, rng, temperature);
  std::vector<std::vector<int>> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.tokens));
  return out;
}

Tensor Generator::next_token_log_probs(const std::vector<PartialRow>& rows,
                                       const std::vector<GenerationContext>& contexts) const {
  const std::size_t n = rows.size();
  const std::size_t hidden = config_.hidden_dim;
  Tensor h({n, hidden});
  Tensor c({n, hidden});
  std::vector<int> lyric_ids(n);
  std::vector<int> note_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i];
    std::copy_n(row.state.h.data(), hidden, h.data() + i * hidden);
    std::copy_n(row.state.c.data(), hidden, c.data() + i * hidden);
    lyric_ids[i] = row.tokens[row.position];
    const auto& melody = contexts.at(row.context).melody;
    note_ids[i] = row.position + 1 < melody.size() ? melody[row.position + 1] : kMelodyExhausted;
  }
  const auto next = nn::lstm_step(lstm_, step_input(lyric_ids, note_ids), h, c);
  return nn::log_softmax(nn::affine(next.h, output_weight_, output_bias_));
}

void Generator::complete(std::vector<PartialRow>& rows,
                         const std::vector<GenerationContext>& contexts, std::mt19937_64& rng,
                         double temperature) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  for (const auto& ctx : contexts) {
    if (uses_melody(config_.mode) && ctx.melody.empty()) {
      throw std::invalid_argument("melody-conditioned generator requires a melody");
    }
    if (!uses_melody(config_.mode) && !ctx.melody.empty()) {
      throw std::invalid_argument("melody given to an unconditioned generator");
    }
  }
  const std::size_t hidden = config_.hidden_dim;
  const std::size_t vocab = config_.lyric_vocab;
  auto finished = [](const PartialRow& r) {
    return r.tokens[r.position] == kEnd || r.position + 1 >= r.tokens.size();
  };
  auto close_if_full = [](PartialRow& r) {
    if (r.tokens[r.position] != kEnd && r.position + 2 == r.tokens.size()) {
      r.position += 1;
      r.tokens[r.position] = kEnd;
    }
  };
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].position >= rows[i].tokens.size()) {
      throw std::invalid_argument("partial row position beyond its length");
    }
    close_if_full(rows[i]);
    if (!finished(rows[i])) active.push_back(i);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> weights(vocab);
  while (!active.empty()) {
    const std::size_t n = active.size();
    Tensor h({n, hidden});
    Tensor c({n, hidden});
    std::vector<int> lyric_ids(n);
    std::vector<int> note_ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = rows[active[i]];
      std::copy_n(row.state.h.data(), hidden, h.data() + i * hidden);
      std::copy_n(row.state.c.data(), hidden, c.data() + i * hidden);
      lyric_ids[i] = row.tokens[row.position];
      if (uses_melody(config_.mode)) {
        const auto& melody = contexts.at(row.context).melody;
        note_ids[i] =
            row.position + 1 < melody.size() ? melody[row.position + 1] : kMelodyExhausted;
      }
    }
    const auto next = nn::lstm_step(lstm_, step_input(lyric_ids, note_ids), h, c);
    const Tensor logits = nn::affine(next.h, output_weight_, output_bias_);

    std::vector<std::size_t> still_active;
    for (std::size_t i = 0; i < n; ++i) {
      auto& row = rows[active[i]];
      const double* z = logits.data() + i * vocab;
      const bool first = row.position == 0;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < vocab; ++v) {
        const bool allowed = v != kPad && v != kStart && v != kUnk && !(first && v == kEnd);
        if (allowed) mx = std::max(mx, z[v]);
      }
      double total = 0.0;
      for (std::size_t v = 0; v < vocab; ++v) {
        const bool allowed = v != kPad && v != kStart && v != kUnk && !(first && v == kEnd);
        weights[v] = allowed ? std::exp((z[v] - mx) / temperature) : 0.0;
        total += weights[v];
      }
      double r = unit(rng) * total;
      std::size_t token = vocab - 1;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (weights[v] == 0.0) continue;
        r -= weights[v];
        token = v;
        if (r < 0.0) break;
      }
      row.position += 1;
      row.tokens[row.position] = static_cast<int>(token);
      row.state.h = Tensor({1, hidden}, std::vector<double>(next.h.data() + i * hidden,
                                                            next.h.data() + (i + 1) * hidden));
      row.state.c = Tensor({1, hidden}, std::vector<double>(next.c.data() + i * hidden,
                                                            next.c.data() + (i + 1) * hidden));
      close_if_full(row);
      if (!finished(row)) still_active.push_back(active[i]);
    }
    active = std::move(still_active);
  }
}

Tensor stack_themes(const std::vector<std::vector<double>>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  Tensor out({rows.size(), dim});
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b].size() != dim) throw std::invalid_argument("theme vectors differ in dimension");
    std::copy(rows[b].begin(), rows[b].end(), out.data() + b * dim);
  }
  return out;
}

// ---- discriminator -------------------------------------------------------------

nlohmann::json DiscriminatorConfig::to_json() const {
  return {{"vocab", vocab},
          {"embedding_dim", embedding_dim},
          {"filter_widths", filter_widths},
          {"feature_maps", feature_maps},
          {"hidden_dim", hidden_dim},
          {"dropout", dropout}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.vocab = j.at("vocab").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.filter_widths = j.at("filter_widths").get<std::vector<std::size_t>>();
  c.feature_maps = j.at("feature_maps").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

std::size_t discriminator_parameter_count(const DiscriminatorConfig& c) {
  std::size_t n = c.vocab * c.embedding_dim;
  std::size_t pooled = 0;
  for (std::size_t w : c.filter_widths) {
    n += w * c.embedding_dim * c.feature_maps + c.feature_maps;
    pooled += c.feature_maps;
  }
  n += pooled * c.hidden_dim + c.hidden_dim;
  n += c.hidden_dim + 1;
  return n;
}

Discriminator::Discriminator(DiscriminatorConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      embedding_("disc.embedding", {config_.vocab, config_.embedding_dim}) {
  if (config_.filter_widths.empty()) throw std::invalid_argument("discriminator needs filters");
  for (std::size_t w : config_.filter_widths) {
    banks_.emplace_back(w, config_.embedding_dim, config_.feature_maps);
  }
  const std::size_t pooled = config_.feature_maps * config_.filter_widths.size();
  hidden_weight_ = Parameter("disc.hidden_weight", {pooled, config_.hidden_dim});
  hidden_bias_ = Parameter("disc.hidden_bias", {config_.hidden_dim});
  output_weight_ = Parameter("disc.output_weight", {config_.hidden_dim, 1});
  output_bias_ = Parameter("disc.output_bias", {1});
  init_all(parameters(), seed);
}

std::vector<Parameter*> Discriminator::parameters() {
  std::vector<Parameter*> out{&embedding_};
  for (auto& bank : banks_) {
    out.push_back(&bank.filter);
    out.push_back(&bank.bias);
  }
  out.insert(out.end(), {&hidden_weight_, &hidden_bias_, &output_weight_, &output_bias_});
  return out;
}

std::vector<const Parameter*> Discriminator::parameters() const {
  auto mutable_params = const_cast<Discriminator*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Discriminator::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

struct Discriminator::Activations {
  std::vector<int> ids;
  nn::ConvCache conv;
  Tensor pooled;
  Tensor hidden_pre;
  Tensor mask;
  Tensor dropped;
  Tensor logits;
};

Discriminator::Activations Discriminator::run(const std::vector<std::vector<int>>& rows,
                                              std::mt19937_64* dropout_rng) const {
  const std::size_t widest =
      *std::max_element(config_.filter_widths.begin(), config_.filter_widths.end());
  std::size_t steps = widest;
  for (const auto& r : rows) steps = std::max(steps, r.size());
  Activations a;
  a.ids.assign(rows.size() * steps, kPad);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    std::copy(rows[b].begin(), rows[b].end(), a.ids.begin() + static_cast<std::ptrdiff_t>(b * steps));
  }
  Tensor embedded = nn::embedding_lookup(embedding_, a.ids);
  Tensor x({rows.size(), steps, config_.embedding_dim}, std::vector<double>(embedded.values().begin(),
                                                                            embedded.values().end()));
  a.pooled = nn::conv1d_maxpool(x, banks_, &a.conv);
  a.hidden_pre = nn::affine(a.pooled, hidden_weight_, hidden_bias_);
  Tensor hidden = nn::relu(a.hidden_pre);
  if (dropout_rng != nullptr && config_.dropout > 0.0) {
    a.mask = nn::dropout_mask(hidden.shape(), config_.dropout, *dropout_rng);
    a.dropped = nn::hadamard(hidden, a.mask);
  } else {
    a.dropped = std::move(hidden);
  }
  a.logits = nn::affine(a.dropped, output_weight_, output_bias_);
  return a;
}

std::vector<double> Discriminator::predict(const std::vector<std::vector<int>>& rows) const {
  if (rows.empty()) return {};
  const auto a = run(rows, nullptr);
  std::vector<double> out(rows.size());
  for (std::size_t b = 0; b < rows.size(); ++b) out[b] = nn::sigmoid(a.logits[b]);
  return out;
}

double Discriminator::loss(const std::vector<std::vector<int>>& rows,
                           std::span<const double> labels, std::mt19937_64& rng,
                           bool accumulate_grad, bool train_mode) {
  if (rows.size() != labels.size()) throw std::invalid_argument("one label per row required");
  if (rows.empty()) return 0.0;
  auto a = run(rows, train_mode ? &rng : nullptr);
  const double n = static_cast<double>(rows.size());
  double total = 0.0;
  Tensor dlogits({rows.size(), 1});
  for (std::size_t b = 0; b < rows.size(); ++b) {
    total += nn::bce_with_logit(a.logits[b], labels[b]);
    dlogits[b] = (nn::sigmoid(a.logits[b]) - labels[b]) / n;
  }
  if (!accumulate_grad) return total / n;

  Tensor ddropped = nn::affine_backward(a.dropped, output_weight_, output_bias_, dlogits);
  Tensor dhidden = a.mask.empty() ? std::move(ddropped) : nn::hadamard(ddropped, a.mask);
  Tensor dpre = nn::relu_backward(a.hidden_pre, dhidden);
  Tensor dpooled = nn::affine_backward(a.pooled, hidden_weight_, hidden_bias_, dpre);
  Tensor dx = nn::conv1d_maxpool_backward(banks_, a.conv, dpooled);
  const Tensor dx_rows({a.ids.size(), config_.embedding_dim},
                       std::vector<double>(dx.values().begin(), dx.values().end()));
  nn::embedding_backward(embedding_, a.ids, dx_rows);
  return total / n;
}

}  // namespace lyricgan
