#include "lyricgan/ngram.hpp"

#include <algorithm>
#include <stdexcept>

#include "lyricgan/log.hpp"

namespace lyricgan {

namespace {

void add_count(Successors& s, int token) {
  auto it = std::lower_bound(s.tokens.begin(), s.tokens.end(), token);
  const auto pos = static_cast<std::size_t>(it - s.tokens.begin());
  if (it == s.tokens.end() || *it != token) {
    s.tokens.insert(it, token);
    s.counts.insert(s.counts.begin() + static_cast<std::ptrdiff_t>(pos), 0);
  }
  ++s.counts[pos];
  ++s.total;
}

/// Draws from the counts, skipping `excluded`; returns -1 when nothing remains.
int draw(const Successors& s, std::mt19937_64& rng, int excluded = -1) {
  int total = 0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (s.tokens[i] != excluded) total += s.counts[i];
  }
  if (total == 0) return -1;
  std::uniform_int_distribution<int> dist(0, total - 1);
  int r = dist(rng);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (s.tokens[i] == excluded) continue;
    if (r < s.counts[i]) return s.tokens[i];
    r -= s.counts[i];
  }
  return s.tokens.back();
}

nlohmann::json successors_json(const Successors& s, const Vocab& vocab) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    out[vocab.syllable(s.tokens[i])] = static_cast<double>(s.counts[i]) / s.total;
  }
  return out;
}

}  // namespace

double Successors::probability(int token) const {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), token);
  if (it == tokens.end() || *it != token || total == 0) return 0.0;
  return static_cast<double>(counts[static_cast<std::size_t>(it - tokens.begin())]) / total;
}

BigramTable BigramTable::fit(const std::vector<LyricMelodyLine>& lines, const Vocab& vocab) {
  if (lines.empty()) throw std::invalid_argument("bigram fit needs at least one line");
  BigramTable t;
  for (const auto& line : lines) {
    int prev = kStart;
    for (const auto& s : line.syllables) {
      const int id = vocab.syllable_id(s);
      add_count(t.table_[prev], id);
      prev = id;
    }
    add_count(t.table_[prev], kEnd);
  }
  return t;
}

double BigramTable::probability(int prev, int next) const {
  const auto* s = successors(prev);
  return s == nullptr ? 0.0 : s->probability(next);
}

const Successors* BigramTable::successors(int prev) const {
  auto it = table_.find(prev);
  return it == table_.end() ? nullptr : &it->second;
}

nlohmann::json BigramTable::to_json(const Vocab& vocab) const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [prev, s] : table_) out[vocab.syllable(prev)] = successors_json(s, vocab);
  return out;
}

McBigramTable McBigramTable::fit(const std::vector<LyricMelodyLine>& lines, const Vocab& vocab) {
  if (lines.empty()) throw std::invalid_argument("MC bigram fit needs at least one line");
  McBigramTable t;
  for (const auto& line : lines) {
    int prev = kStart;
    for (std::size_t i = 0; i < line.syllables.size(); ++i) {
      const int id = vocab.syllable_id(line.syllables[i]);
      const int note = nearest_note(line.notes[i], vocab);
      add_count(t.table_[{prev, note}], id);
      prev = id;
    }
  }
  return t;
}

double McBigramTable::probability(int prev, int note, int next) const {
  const auto* s = successors(prev, note);
  return s == nullptr ? 0.0 : s->probability(next);
}

const Successors* McBigramTable::successors(int prev, int note) const {
  auto it = table_.find({prev, note});
  return it == table_.end() ? nullptr : &it->second;
}

nlohmann::json McBigramTable::to_json(const Vocab& vocab) const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, s] : table_) {
    const std::string note =
        key.second < kNumSpecials ? special_name(key.second) : to_string(vocab.note(key.second));
    out[vocab.syllable(key.first) + "|" + note] = successors_json(s, vocab);
  }
  return out;
}

std::vector<int> sample_bigram(const BigramTable& table, std::mt19937_64& rng,
                               std::size_t max_len) {
  std::vector<int> out;
  int prev = kStart;
  while (out.size() + 2 < max_len) {
    const auto* s = table.successors(prev);
    if (s == nullptr) break;  // dead end: treated as <END>
    const int next = draw(*s, rng);
    if (next == kEnd) break;
    out.push_back(next);
    prev = next;
  }
  return out;
}

std::vector<int> sample_mc_bigram(const McBigramTable& table, const BigramTable& fallback,
                                  const std::vector<int>& melody_note_ids, std::mt19937_64& rng,
                                  McSampleStats* stats) {
  if (melody_note_ids.empty()) throw std::invalid_argument("MC bigram sampling needs a melody");
  McSampleStats local;
  std::vector<int> out;
  out.reserve(melody_note_ids.size());
  int prev = kStart;
  for (int note : melody_note_ids) {
    int next = -1;
    if (const auto* s = table.successors(prev, note)) {
      ++local.conditioned;
      next = draw(*s, rng);
    } else {
      ++local.backoffs;
      if (const auto* f = fallback.successors(prev)) next = draw(*f, rng, kEnd);
      if (next < 0) {
        ++local.unknowns;
        next = kUnk;
      }
    }
    out.push_back(next);
    prev = next;
  }
  if (local.unknowns > 0) {
    log::debug("MC bigram emitted " + std::to_string(local.unknowns) + " <UNK> tokens");
  }
  if (stats != nullptr) {
    stats->conditioned += local.conditioned;
    stats->backoffs += local.backoffs;
    stats->unknowns += local.unknowns;
  }
  return out;
}

}  // namespace lyricgan
