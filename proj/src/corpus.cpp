#include "lyricgan/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "lyricgan/log.hpp"

namespace lyricgan {

namespace {

const std::array<std::string, kNumSpecials> kSpecialNames = {"<PAD>", "<START>", "<END>",
                                                             "<UNK>"};

}  // namespace

bool note_in_range(const NoteToken& note) {
  return note.pitch >= kMinPitch && note.pitch <= kMaxPitch && note.duration >= kMinDuration &&
         note.duration <= kMaxDuration;
}

std::string to_string(const NoteToken& note) {
  return std::to_string(note.pitch) + ":" + std::to_string(note.duration);
}

const std::string& special_name(int id) { return kSpecialNames.at(static_cast<std::size_t>(id)); }

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json to_json(const LyricMelodyLine& line) {
  nlohmann::json notes = nlohmann::json::array();
  for (const auto& n : line.notes) notes.push_back({n.pitch, n.duration});
  nlohmann::json j = {{"song_id", line.song_id},
                      {"line_index", line.line_index},
                      {"syllables", line.syllables},
                      {"notes", std::move(notes)}};
  j["theme"] = line.theme ? nlohmann::json(*line.theme) : nlohmann::json(nullptr);
  return j;
}

void validate_line(const LyricMelodyLine& line) {
  if (line.syllables.empty()) throw CorpusError("line has no syllables");
  if (line.syllables.size() != line.notes.size()) {
    throw CorpusError("alignment error: " + std::to_string(line.syllables.size()) +
                      " syllables but " + std::to_string(line.notes.size()) + " notes");
  }
  for (const auto& s : line.syllables) {
    if (s.empty()) throw CorpusError("empty syllable");
  }
  for (const auto& n : line.notes) {
    if (n.pitch < kMinPitch || n.pitch > kMaxPitch) {
      throw CorpusError("pitch " + std::to_string(n.pitch) + " outside [21, 108]");
    }
    if (n.duration < kMinDuration || n.duration > kMaxDuration) {
      throw CorpusError("duration " + std::to_string(n.duration) + " outside [1, 128]");
    }
  }
}

LyricMelodyLine parse_corpus_record(const std::string& text, std::size_t line_number) {
  const std::string where = "corpus line " + std::to_string(line_number) + ": ";
  LyricMelodyLine line;
  try {
    const auto j = nlohmann::json::parse(text);
    line.song_id = j.at("song_id").get<std::string>();
    line.line_index = j.at("line_index").get<int>();
    line.syllables = j.at("syllables").get<std::vector<std::string>>();
    for (const auto& n : j.at("notes")) {
      if (!n.is_array() || n.size() != 2) throw CorpusError("note must be [pitch, duration]");
      line.notes.push_back({n[0].get<int>(), n[1].get<int>()});
    }
    if (j.contains("theme") && !j["theme"].is_null()) line.theme = j["theme"].get<int>();
    validate_line(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(where + "malformed record (" + e.what() + ")");
  } catch (const CorpusError& e) {
    throw CorpusError(where + e.what());
  }
  return line;
}

std::vector<LyricMelodyLine> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  std::vector<LyricMelodyLine> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.push_back(parse_corpus_record(text, number));
  }
  return lines;
}

void save_corpus(const std::filesystem::path& path, const std::vector<LyricMelodyLine>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  for (const auto& line : lines) out << to_json(line).dump() << '\n';
}

Vocab::Vocab() {
  for (int i = 0; i < kNumSpecials; ++i) {
    syllables_.push_back(kSpecialNames[static_cast<std::size_t>(i)]);
    syllable_index_.emplace(kSpecialNames[static_cast<std::size_t>(i)], i);
    notes_.push_back(NoteToken{0, 0});
  }
}

int Vocab::add_syllable(const std::string& syllable) {
  auto [it, inserted] = syllable_index_.emplace(syllable, static_cast<int>(syllables_.size()));
  if (inserted) syllables_.push_back(syllable);
  return it->second;
}

int Vocab::add_note(const NoteToken& note) {
  auto [it, inserted] = note_index_.emplace(note, static_cast<int>(notes_.size()));
  if (inserted) notes_.push_back(note);
  return it->second;
}

int Vocab::syllable_id(const std::string& syllable) const {
  auto it = syllable_index_.find(syllable);
  return it == syllable_index_.end() ? kUnk : it->second;
}

std::optional<int> Vocab::find_note(const NoteToken& note) const {
  auto it = note_index_.find(note);
  if (it == note_index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::syllable(int id) const {
  return syllables_.at(static_cast<std::size_t>(id));
}

const NoteToken& Vocab::note(int id) const {
  if (id < kNumSpecials) throw std::out_of_range("special note id has no pitch/duration");
  return notes_.at(static_cast<std::size_t>(id));
}

nlohmann::json Vocab::to_json() const {
  nlohmann::json notes = nlohmann::json::array();
  for (std::size_t i = kNumSpecials; i < notes_.size(); ++i) {
    notes.push_back({notes_[i].pitch, notes_[i].duration});
  }
  return {{"syllables", std::vector<std::string>(syllables_.begin() + kNumSpecials,
                                                 syllables_.end())},
          {"notes", std::move(notes)}};
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  Vocab v;
  for (const auto& s : j.at("syllables")) {
    const auto text = s.get<std::string>();
    if (v.add_syllable(text) != static_cast<int>(v.syllable_count()) - 1) {
      throw CorpusError("vocab file repeats syllable '" + text + "'");
    }
  }
  for (const auto& n : j.at("notes")) {
    const NoteToken note{n.at(0).get<int>(), n.at(1).get<int>()};
    if (v.add_note(note) != static_cast<int>(v.note_count()) - 1) {
      throw CorpusError("vocab file repeats note " + to_string(note));
    }
  }
  return v;
}

std::uint64_t Vocab::hash() const { return fnv1a(to_json().dump()); }

Vocab build_vocabs(const std::vector<LyricMelodyLine>& lines) {
  Vocab v;
  for (const auto& line : lines) {
    for (const auto& s : line.syllables) v.add_syllable(s);
    for (const auto& n : line.notes) v.add_note(n);
  }
  return v;
}

int nearest_note(const NoteToken& note, const Vocab& vocab) {
  if (auto known = vocab.find_note(note)) return *known;
  int best = -1;
  long best_cost = std::numeric_limits<long>::max();
  NoteToken best_note{};
  for (int id = kNumSpecials; id < static_cast<int>(vocab.note_count()); ++id) {
    const NoteToken& cand = vocab.note(id);
    const long cost = 2L * std::abs(cand.pitch - note.pitch) + std::abs(cand.duration - note.duration);
    const bool better = cost < best_cost ||
                        (cost == best_cost && (cand.pitch < best_note.pitch ||
                                               (cand.pitch == best_note.pitch &&
                                                cand.duration < best_note.duration)));
    if (better) {
      best = id;
      best_cost = cost;
      best_note = cand;
    }
  }
  if (best < 0) throw CorpusError("note vocabulary is empty");
  return best;
}

EncodedRow encode_line(const LyricMelodyLine& line, const Vocab& vocab, std::size_t max_len) {
  if (line.syllables.empty()) throw CorpusError("cannot encode an empty line");
  if (line.syllables.size() != line.notes.size()) {
    throw CorpusError("cannot encode misaligned line " + line.id());
  }
  if (line.syllables.size() + 2 > max_len) {
    throw CorpusError("line " + line.id() + " of " + std::to_string(line.syllables.size()) +
                      " syllables exceeds maximum length " + std::to_string(max_len));
  }
  EncodedRow row;
  row.lyrics.assign(max_len, kPad);
  row.notes.assign(max_len, kPad);
  row.lyrics[0] = kStart;
  row.notes[0] = kStart;
  for (std::size_t i = 0; i < line.syllables.size(); ++i) {
    row.lyrics[i + 1] = vocab.syllable_id(line.syllables[i]);
    row.notes[i + 1] = nearest_note(line.notes[i], vocab);
  }
  row.lyrics[line.syllables.size() + 1] = kEnd;
  row.notes[line.syllables.size() + 1] = kEnd;
  row.length = static_cast<int>(line.syllables.size()) + 2;
  row.theme = line.theme.value_or(-1);
  return row;
}

std::vector<int> content_ids(const std::vector<int>& row) {
  std::vector<int> out;
  std::size_t i = (!row.empty() && row[0] == kStart) ? 1 : 0;
  for (; i < row.size() && row[i] != kEnd && row[i] != kPad; ++i) out.push_back(row[i]);
  return out;
}

std::vector<std::string> decode_lyrics(const std::vector<int>& row, const Vocab& vocab) {
  std::vector<std::string> out;
  for (int id : content_ids(row)) out.push_back(vocab.syllable(id));
  return out;
}

std::vector<int> EncodedBatch::lyric_row(std::size_t r) const {
  return {lyrics.begin() + static_cast<std::ptrdiff_t>(r * steps),
          lyrics.begin() + static_cast<std::ptrdiff_t>((r + 1) * steps)};
}

std::vector<int> EncodedBatch::note_row(std::size_t r) const {
  return {notes.begin() + static_cast<std::ptrdiff_t>(r * steps),
          notes.begin() + static_cast<std::ptrdiff_t>((r + 1) * steps)};
}

EncodedBatch make_batch(const std::vector<EncodedRow>& rows, std::size_t max_len) {
  EncodedBatch batch;
  batch.rows = rows.size();
  batch.steps = max_len;
  batch.lyrics.reserve(rows.size() * max_len);
  batch.notes.reserve(rows.size() * max_len);
  for (const auto& row : rows) {
    if (row.lyrics.size() != max_len || row.notes.size() != max_len) {
      throw CorpusError("encoded row length does not match batch length");
    }
    batch.lyrics.insert(batch.lyrics.end(), row.lyrics.begin(), row.lyrics.end());
    batch.notes.insert(batch.notes.end(), row.notes.begin(), row.notes.end());
    batch.lengths.push_back(row.length);
    batch.themes.push_back(row.theme);
  }
  return batch;
}

CorpusSplits split_corpus(std::vector<LyricMelodyLine> lines, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(lines.begin(), lines.end(), rng);
  const std::size_t n = lines.size();
  const std::size_t n_train = (n * 8 + 5) / 10;
  const std::size_t n_valid = std::min(n - n_train, (n + 5) / 10);
  CorpusSplits splits;
  auto first = std::make_move_iterator(lines.begin());
  splits.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  splits.valid.assign(first + static_cast<std::ptrdiff_t>(n_train),
                      first + static_cast<std::ptrdiff_t>(n_train + n_valid));
  splits.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_valid),
                     std::make_move_iterator(lines.end()));
  return splits;
}

std::size_t default_max_len(const std::vector<LyricMelodyLine>& lines, std::size_t cap) {
  std::size_t longest = 0;
  for (const auto& line : lines) longest = std::max(longest, line.syllables.size());
  return std::min(longest + 2, cap);
}

std::size_t drop_long_lines(std::vector<LyricMelodyLine>& lines, std::size_t max_len) {
  const auto before = lines.size();
  std::erase_if(lines, [&](const LyricMelodyLine& l) { return l.syllables.size() + 2 > max_len; });
  const std::size_t dropped = before - lines.size();
  if (dropped > 0) {
    log::info("dropped " + std::to_string(dropped) + " lines longer than " +
              std::to_string(max_len - 2) + " syllables");
  }
  return dropped;
}

std::vector<NoteToken> parse_inline_melody(const std::string& text) {
  std::istringstream in(text);
  std::vector<NoteToken> notes;
  std::string token;
  std::size_t index = 0;
  while (in >> token) {
    ++index;
    const auto colon = token.find(':');
    const std::string where = "melody token " + std::to_string(index) + " '" + token + "': ";
    if (colon == std::string::npos) throw CorpusError(where + "expected pitch:duration");
    NoteToken note;
    try {
      std::size_t used = 0;
      const std::string pitch = token.substr(0, colon);
      const std::string duration = token.substr(colon + 1);
      note.pitch = std::stoi(pitch, &used);
      if (used != pitch.size()) throw std::invalid_argument("pitch");
      note.duration = std::stoi(duration, &used);
      if (used != duration.size()) throw std::invalid_argument("duration");
    } catch (const std::logic_error&) {
      throw CorpusError(where + "not an integer pair");
    }
    if (note.pitch < kMinPitch || note.pitch > kMaxPitch) {
      throw CorpusError(where + "pitch outside [21, 108]");
    }
    if (note.duration < kMinDuration || note.duration > kMaxDuration) {
      throw CorpusError(where + "duration outside [1, 128]");
    }
    notes.push_back(note);
  }
  if (notes.empty()) throw CorpusError("melody is empty");
  return notes;
}

}  // namespace lyricgan
