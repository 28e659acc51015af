#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lyricgan/corpus.hpp"

namespace lyricgan {

/// Successor distribution of one conditioning key, sorted by token id.
struct Successors {
  std::vector<int> tokens;
  std::vector<int> counts;
  int total = 0;

  double probability(int token) const;
};

/// P(l_n | l_{n-1}) over syllable ids, <START> as the first context and <END>
/// as a successor. Maximum likelihood, no smoothing.
class BigramTable {
 public:
  static BigramTable fit(const std::vector<LyricMelodyLine>& lines, const Vocab& vocab);

  double probability(int prev, int next) const;
  /// nullptr when `prev` was never seen as a context.
  const Successors* successors(int prev) const;
  std::size_t context_count() const { return table_.size(); }

  nlohmann::json to_json(const Vocab& vocab) const;

 private:
  std::map<int, Successors> table_;
};

/// P(l_n | l_{n-1}, m_n) keyed by (previous syllable id, current note id).
class McBigramTable {
 public:
  using Key = std::pair<int, int>;

  static McBigramTable fit(const std::vector<LyricMelodyLine>& lines, const Vocab& vocab);

  double probability(int prev, int note, int next) const;
  const Successors* successors(int prev, int note) const;
  bool contains(int prev, int note) const { return successors(prev, note) != nullptr; }
  std::size_t key_count() const { return table_.size(); }

  nlohmann::json to_json(const Vocab& vocab) const;

 private:
  std::map<Key, Successors> table_;
};

/// Samples a syllable-id line from <START> until <END>, a dead end, or max_len - 2 tokens.
std::vector<int> sample_bigram(const BigramTable& table, std::mt19937_64& rng,
                               std::size_t max_len);

struct McSampleStats {
  std::size_t conditioned = 0;  // (prev, note) key found
  std::size_t backoffs = 0;     // fell back to P(l | prev)
  std::size_t unknowns = 0;     // fallback also undefined, emitted <UNK>
};

/// Emits exactly melody.size() syllable ids. <END> is never sampled mid-melody:
/// on backoff it is excluded from the fallback distribution.
std::vector<int> sample_mc_bigram(const McBigramTable& table, const BigramTable& fallback,
                                  const std::vector<int>& melody_note_ids, std::mt19937_64& rng,
                                  McSampleStats* stats = nullptr);

}  // namespace lyricgan
