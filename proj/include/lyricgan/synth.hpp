#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lyricgan/corpus.hpp"

namespace lyricgan {

inline constexpr int kSynthThemes = 5;

/// Planted labels for the five synthetic themes, in theme order.
const std::vector<std::string>& synth_theme_labels();

struct SynthCorpus {
  std::vector<LyricMelodyLine> lines;
  std::map<std::string, int> planted_theme;  // song_id -> theme
};

/// Desk-scale lyric/melody corpus. Each song draws its content words from one
/// of five disjoint theme pools and its pitches from that theme's octave, and
/// repeats a two-line chorus after every four verse lines.
/// Byte-identical for a given seed.
SynthCorpus synth_corpus(std::uint64_t seed, std::size_t n_songs, std::size_t lines_per_song);

/// Function words used by the synthetic grammar; also the default stop-word list.
const std::vector<std::string>& synth_stopwords();

/// Content words of one synthetic theme (joined form, e.g. "country").
std::vector<std::string> synth_theme_words(int theme);

/// Word-vector table in the common text format ("count dim" header, then
/// "word f1 ... fD"): theme words cluster around a per-theme centre.
void write_synth_word_vectors(const std::filesystem::path& path, std::size_t dim,
                              std::uint64_t seed);

}  // namespace lyricgan
