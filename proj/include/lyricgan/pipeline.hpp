#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lyricgan/corpus.hpp"
#include "lyricgan/eval.hpp"
#include "lyricgan/lda.hpp"
#include "lyricgan/models.hpp"
#include "lyricgan/ngram.hpp"
#include "lyricgan/training.hpp"

namespace lyricgan {

struct PreparedCorpus {
  Vocab vocab;
  CorpusSplits splits;
  std::size_t max_len = 0;
  std::size_t dropped = 0;
};

/// Drops over-long lines, builds both vocabularies over the whole corpus and
/// splits 80/10/10 by a seeded line shuffle.
PreparedCorpus prepare_corpus(std::vector<LyricMelodyLine> lines, std::uint64_t seed,
                              std::size_t length_cap = 32);

/// Writes vocab.json, splits.json (line ids per split), train/valid/test.jsonl
/// and prepare.json (max_len, counts, seed, config hash) into `dir`.
void save_prepared(const std::filesystem::path& dir, const PreparedCorpus& corpus,
                   const nlohmann::json& meta);
/// Reads what save_prepared wrote. Throws when a file is missing.
PreparedCorpus load_prepared(const std::filesystem::path& dir, nlohmann::json* meta = nullptr);

/// Fits LDA over songs, assigns every song its argmax theme, ranks top words
/// and averages their word vectors into theme embeddings.
ThemeModel fit_theme_model(const std::vector<LyricMelodyLine>& lines,
                           const std::vector<std::string>& stopwords,
                           const WordVectorTable& vectors, const LdaOptions& options);

/// Encodes the splits for one conditioning mode. Themed mode needs a theme model
/// with embeddings; row themes come from its song assignments.
TrainingSet make_training_set(ConditioningMode mode, const PreparedCorpus& corpus,
                              const ThemeModel* themes);

/// Scores lines against a reference pool; `note_counts` empty skips alignment.
ModelScores score_lines(const std::string& name, const std::vector<std::vector<int>>& lines,
                        const BleuReferencePool& pool, const std::vector<std::size_t>& note_counts);

/// One generated line per row, conditioned on that row's context. Content ids only.
std::vector<std::vector<int>> generate_lines(const Generator& gen, const TrainingSet& data,
                                             const std::vector<EncodedRow>& rows,
                                             std::uint64_t seed);

std::vector<std::vector<int>> bigram_lines(const BigramTable& table, std::size_t count,
                                           std::size_t max_len, std::uint64_t seed);

std::vector<std::vector<int>> mc_bigram_lines(const McBigramTable& table,
                                              const BigramTable& fallback,
                                              const std::vector<EncodedRow>& rows,
                                              std::uint64_t seed, McSampleStats* stats = nullptr);

/// Melody note count (specials excluded) of each row.
std::vector<std::size_t> note_counts(const std::vector<EncodedRow>& rows);

struct ThemeExperiment {
  std::size_t groups_per_theme = 20;
  std::size_t lines_per_group = 8;
  std::uint64_t seed = 1;
};

/// For every theme, generates groups of lines conditioned on it (melodies drawn
/// from `rows` in order) and classifies each group with the theme model.
ThemeEvalReport theme_experiment(const Generator& gen, const TrainingSet& data,
                                 const std::vector<EncodedRow>& rows, const ThemeModel& themes,
                                 const Vocab& vocab, const std::vector<std::string>& stopwords,
                                 const ThemeExperiment& options);

}  // namespace lyricgan
