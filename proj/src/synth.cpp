#include "lyricgan/synth.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

namespace lyricgan {

namespace {

struct ThemePool {
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
  std::vector<std::string> adjectives;
};

// Hyphens mark syllable boundaries inside a word.
const std::array<ThemePool, kSynthThemes>& pools() {
  static const std::array<ThemePool, kSynthThemes> kPools = {{
      {{"ba-by", "girl", "phone", "door", "road", "night", "car", "let-ter", "town", "train",
        "bed", "rain", "line", "friend"},
       {"call", "leave", "wait", "drive", "miss", "fol-low", "go", "run", "cry"},
       {"a-way", "gone", "late", "lone-ly", "cold", "blue", "lost", "long"}},
      {{"flag", "land", "coun-try", "na-tion", "sol-dier", "home", "field", "ri-ver", "star",
        "war", "gun", "hill", "sea", "stripe"},
       {"stand", "fight", "march", "rise", "guard", "de-fend", "serve", "hold", "win"},
       {"free", "proud", "brave", "strong", "true", "grand", "bold", "wide"}},
      {{"heart", "kiss", "rose", "eyes", "arms", "fi-re", "dream", "lo-ver", "moon", "lips",
        "skin", "soul", "smile", "hand"},
       {"love", "touch", "feel", "need", "want", "em-brace", "hug", "melt", "burn"},
       {"sweet", "ten-der", "warm", "dear", "gen-tle", "soft", "kind", "fond"}},
      {{"lord", "hea-ven", "grace", "light", "je-sus", "an-gel", "prayer", "glo-ry", "faith",
        "cross", "church", "king", "saint", "psalm"},
       {"pray", "praise", "sing", "shine", "bless", "de-li-ver", "kneel", "save", "trust"},
       {"ho-ly", "pure", "bright", "di-vine", "migh-ty", "good", "blessed", "meek"}},
      {{"dance", "floor", "mu-sic", "beat", "par-ty", "drink", "club", "bass", "crowd", "neon",
        "groove", "song", "drum", "dj"},
       {"jump", "move", "shake", "spin", "drop", "cel-e-brate", "bounce", "clap", "rock"},
       {"loud", "wild", "hot", "cra-zy", "fun-ky", "fresh", "high", "fast"}},
  }};
  return kPools;
}

// N = noun, V = verb, A = adjective; everything else is a function word.
const std::vector<std::vector<std::string>>& templates() {
  static const std::vector<std::vector<std::string>> kTemplates = {
      {"i", "V", "the", "N"},         {"my", "A", "N"},
      {"we", "V", "in", "the", "N"},  {"oh", "my", "N"},
      {"you", "V", "my", "A", "N"},   {"the", "N", "is", "A"},
      {"i", "V", "you", "in", "the", "N"}, {"so", "A", "so", "A"},
      {"all", "of", "your", "N"},     {"we", "V", "on", "a", "A", "N"},
  };
  return kTemplates;
}

std::vector<std::string> split_syllables(const std::string& word) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (word[i] == '-') {
      out.push_back(word.substr(start, i - start + 1));
      start = i + 1;
    }
  }
  out.push_back(word.substr(start));
  return out;
}

std::string join_word(const std::string& hyphenated) {
  std::string out;
  for (char c : hyphenated) {
    if (c != '-') out += c;
  }
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

struct Word {
  std::string text;
  bool content = false;
};

std::vector<Word> expand_template(const std::vector<std::string>& tmpl, const ThemePool& pool,
                                  std::mt19937_64& rng) {
  std::vector<Word> words;
  for (const auto& slot : tmpl) {
    if (slot == "N") {
      words.push_back({pick(pool.nouns, rng), true});
    } else if (slot == "V") {
      words.push_back({pick(pool.verbs, rng), true});
    } else if (slot == "A") {
      words.push_back({pick(pool.adjectives, rng), true});
    } else {
      words.push_back({slot, false});
    }
  }
  return words;
}

constexpr std::array<int, 8> kScale = {0, 2, 4, 5, 7, 9, 11, 12};

constexpr std::array<int, 4> kInnerDurations = {1, 2, 4, 6};
constexpr std::array<double, 4> kContentDurations = {0.1, 0.3, 0.7, 1.0};
constexpr std::array<double, 4> kFunctionDurations = {0.3, 0.7, 0.9, 1.0};

int theme_base_pitch(int theme) { return 40 + 12 * theme; }

}  // namespace

const std::vector<std::string>& synth_theme_labels() {
  static const std::vector<std::string> kLabels = {"relationship", "patriotism", "love", "gospel",
                                                   "party"};
  return kLabels;
}

const std::vector<std::string>& synth_stopwords() {
  static const std::vector<std::string> kStop = {"i",   "you", "we", "my",   "your", "the",
                                                 "and", "in",  "on", "oh",   "yeah", "all",
                                                 "a",   "is",  "of", "so"};
  return kStop;
}

std::vector<std::string> synth_theme_words(int theme) {
  const auto& pool = pools().at(static_cast<std::size_t>(theme));
  std::vector<std::string> out;
  for (const auto* group : {&pool.nouns, &pool.verbs, &pool.adjectives}) {
    for (const auto& w : *group) out.push_back(join_word(w));
  }
  return out;
}

SynthCorpus synth_corpus(std::uint64_t seed, std::size_t n_songs, std::size_t lines_per_song) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> theme_dist(0, kSynthThemes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> step_dist(-2, 2);

  SynthCorpus corpus;
  for (std::size_t s = 0; s < n_songs; ++s) {
    std::ostringstream id;
    id << "synth-" << std::setw(4) << std::setfill('0') << s;
    const int theme = theme_dist(rng);
    corpus.planted_theme[id.str()] = theme;
    const auto& pool = pools()[static_cast<std::size_t>(theme)];

    auto make_line = [&]() {
      std::vector<Word> words;
      std::vector<std::string> syllables;
      std::vector<bool> content;
      // Two clauses, sometimes joined by "and", sometimes closed by "yeah";
      // resampled until the line has 5 to 12 syllables.
      do {
        words = expand_template(pick(templates(), rng), pool, rng);
        if (unit(rng) < 0.5) words.push_back({"and", false});
        auto more = expand_template(pick(templates(), rng), pool, rng);
        words.insert(words.end(), more.begin(), more.end());
        if (unit(rng) < 0.25) words.push_back({"yeah", false});
        syllables.clear();
        content.clear();
        for (const auto& w : words) {
          for (auto& syl : split_syllables(w.text)) {
            syllables.push_back(std::move(syl));
            content.push_back(w.content);
          }
        }
      } while (syllables.size() < 5 || syllables.size() > 12);

      LyricMelodyLine line;
      line.song_id = id.str();
      line.syllables = syllables;
      int degree = static_cast<int>(rng() % kScale.size());
      for (std::size_t i = 0; i < syllables.size(); ++i) {
        degree = std::clamp(degree + step_dist(rng), 0, static_cast<int>(kScale.size()) - 1);
        int duration = 0;
        if (i + 1 == syllables.size()) {
          duration = unit(rng) < 0.5 ? 8 : 12;
        } else {
          // Stressed (content) syllables lean long, function syllables short.
          const auto& cumulative = content[i] ? kContentDurations : kFunctionDurations;
          const double u = unit(rng);
          std::size_t k = 0;
          while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
          duration = kInnerDurations[k];
        }
        line.notes.push_back({theme_base_pitch(theme) + kScale[static_cast<std::size_t>(degree)],
                              duration});
      }
      return line;
    };
    // Songs alternate four verse lines with a two-line chorus that repeats
    // word for word, melody included.
    std::array<LyricMelodyLine, 2> chorus = {make_line(), make_line()};
    for (std::size_t l = 0; l < lines_per_song; ++l) {
      const std::size_t slot = l % 6;
      LyricMelodyLine line = slot >= 4 ? chorus[slot - 4] : make_line();
      line.line_index = static_cast<int>(l);
      corpus.lines.push_back(std::move(line));
    }
  }
  return corpus;
}

void write_synth_word_vectors(const std::filesystem::path& path, std::size_t dim,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (int t = 0; t < kSynthThemes; ++t) {
    std::vector<double> centre(dim);
    for (double& v : centre) v = normal(rng);
    for (const auto& word : synth_theme_words(t)) {
      std::vector<double> vec(dim);
      for (std::size_t i = 0; i < dim; ++i) vec[i] = centre[i] + 0.3 * normal(rng);
      rows.emplace_back(word, std::move(vec));
    }
  }
  for (const auto& word : synth_stopwords()) {
    std::vector<double> vec(dim);
    for (double& v : vec) v = normal(rng);
    rows.emplace_back(word, std::move(vec));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write word vectors to " + path.string());
  out << rows.size() << ' ' << dim << '\n';
  out << std::setprecision(6) << std::fixed;
  for (const auto& [word, vec] : rows) {
    out << word;
    for (double v : vec) out << ' ' << v;
    out << '\n';
  }
}

}  // namespace lyricgan
