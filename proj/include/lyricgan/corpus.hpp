#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace lyricgan {

inline constexpr int kMinPitch = 21;
inline constexpr int kMaxPitch = 108;
inline constexpr int kMinDuration = 1;    // a sixteenth note
inline constexpr int kMaxDuration = 128;  // eight whole notes

// Reserved indices shared by the syllable and note vocabularies.
inline constexpr int kPad = 0;
inline constexpr int kStart = 1;
inline constexpr int kEnd = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;

/// Pitch is a MIDI number, duration a count of sixteenth notes.
struct NoteToken {
  int pitch = 60;
  int duration = 4;

  friend auto operator<=>(const NoteToken&, const NoteToken&) = default;
};

bool note_in_range(const NoteToken& note);
std::string to_string(const NoteToken& note);

struct LyricMelodyLine {
  std::string song_id;
  int line_index = 0;
  std::vector<std::string> syllables;
  std::vector<NoteToken> notes;
  std::optional<int> theme;

  std::string id() const { return song_id + ":" + std::to_string(line_index); }
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const LyricMelodyLine& line);
/// Parses and validates one corpus record; `line_number` is only used in messages.
LyricMelodyLine parse_corpus_record(const std::string& text, std::size_t line_number);
void validate_line(const LyricMelodyLine& line);

/// Reads a line-delimited JSON corpus. Blank lines are skipped.
std::vector<LyricMelodyLine> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<LyricMelodyLine>& lines);

class Vocab {
 public:
  Vocab();

  /// Adds a syllable if absent and returns its index.
  int add_syllable(const std::string& syllable);
  int add_note(const NoteToken& note);

  /// Index of a syllable, or kUnk.
  int syllable_id(const std::string& syllable) const;
  std::optional<int> find_note(const NoteToken& note) const;
  const std::string& syllable(int id) const;
  /// Only valid for non-special note ids.
  const NoteToken& note(int id) const;

  std::size_t syllable_count() const { return syllables_.size(); }
  std::size_t note_count() const { return notes_.size(); }

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);
  /// FNV-1a hash of the serialized vocabulary.
  std::uint64_t hash() const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.syllables_ == b.syllables_ && a.notes_ == b.notes_;
  }

 private:
  std::vector<std::string> syllables_;
  std::unordered_map<std::string, int> syllable_index_;
  std::vector<NoteToken> notes_;
  std::map<NoteToken, int> note_index_;
};

const std::string& special_name(int id);

/// Indices assigned in first-occurrence order after the four specials.
Vocab build_vocabs(const std::vector<LyricMelodyLine>& lines);

/// Index of the note itself when known, else the known note minimizing
/// 2*|dpitch| + |dduration| (ties: lower pitch, then shorter duration).
int nearest_note(const NoteToken& note, const Vocab& vocab);

struct EncodedRow {
  std::vector<int> lyrics;
  std::vector<int> notes;
  int length = 0;  // positions up to and including <END>
  int theme = -1;
};

/// <START> ids <END> <PAD>... for lyrics, notes aligned position for position.
/// Unknown syllables map to <UNK>, unknown notes to their nearest known note.
EncodedRow encode_line(const LyricMelodyLine& line, const Vocab& vocab, std::size_t max_len);

/// Syllables between <START> and <END>.
std::vector<std::string> decode_lyrics(const std::vector<int>& row, const Vocab& vocab);
/// Content ids strictly between <START> and the first <END>.
std::vector<int> content_ids(const std::vector<int>& row);

struct EncodedBatch {
  std::size_t rows = 0;
  std::size_t steps = 0;
  std::vector<int> lyrics;   // rows x steps
  std::vector<int> notes;    // rows x steps
  std::vector<int> lengths;  // per row
  std::vector<int> themes;   // per row, -1 when absent

  int lyric(std::size_t r, std::size_t t) const { return lyrics[r * steps + t]; }
  int note(std::size_t r, std::size_t t) const { return notes[r * steps + t]; }
  std::vector<int> lyric_row(std::size_t r) const;
  std::vector<int> note_row(std::size_t r) const;
};

EncodedBatch make_batch(const std::vector<EncodedRow>& rows, std::size_t max_len);

struct CorpusSplits {
  std::vector<LyricMelodyLine> train;
  std::vector<LyricMelodyLine> valid;
  std::vector<LyricMelodyLine> test;
};

/// Seeded line-level shuffle then an 80/10/10 partition.
CorpusSplits split_corpus(std::vector<LyricMelodyLine> lines, std::uint64_t seed);

/// Longest line + 2 specials, capped.
std::size_t default_max_len(const std::vector<LyricMelodyLine>& lines, std::size_t cap = 32);

/// Removes lines whose encoding would not fit in max_len; returns how many were dropped.
std::size_t drop_long_lines(std::vector<LyricMelodyLine>& lines, std::size_t max_len);

/// "60:4 62:4 64:8" -> notes. Throws CorpusError naming the offending token.
std::vector<NoteToken> parse_inline_melody(const std::string& text);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace lyricgan
