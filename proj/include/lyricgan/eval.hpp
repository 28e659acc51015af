#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace lyricgan {

inline constexpr double kBleuEpsilon = 1e-9;

/// Reference lines indexed for cumulative BLEU: for every n-gram up to max_n,
/// the largest count it reaches in any single reference.
class BleuReferencePool {
 public:
  BleuReferencePool(const std::vector<std::vector<int>>& references, std::size_t max_n);

  std::size_t max_n() const { return max_n_; }
  std::size_t size() const { return lengths_.size(); }
  int max_count(const std::vector<int>& ngram) const;
  /// Reference length closest to `length`, shorter on ties.
  std::size_t closest_length(std::size_t length) const;

  /// Cumulative BLEU-n for n <= max_n(). Zero for an empty candidate.
  double score(std::span<const int> candidate, std::size_t n) const;

 private:
  std::size_t max_n_;
  std::map<std::vector<int>, int> max_counts_;
  std::vector<std::size_t> lengths_;  // sorted
};

/// Geometric mean of clipped 1..max_n-gram precisions times the brevity
/// penalty. Zero matches count as kBleuEpsilon.
double bleu_cumulative(std::span<const int> candidate,
                       const std::vector<std::vector<int>>& references, std::size_t max_n);

struct ScoreSummary {
  std::vector<double> per_line;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

ScoreSummary summarize(std::vector<double> scores);

struct BleuReport {
  ScoreSummary bleu2;
  ScoreSummary bleu4;
};

BleuReport corpus_bleu_stats(const std::vector<std::vector<int>>& generated,
                             const BleuReferencePool& pool);

/// Uniform seeded subsample of at most `cap` references, original order kept.
std::vector<std::vector<int>> cap_references(std::vector<std::vector<int>> references,
                                             std::size_t cap, std::uint64_t seed);

/// Fraction of lines whose syllable count equals the note count of their melody.
double alignment_ratio(std::span<const std::size_t> syllable_counts,
                       std::span<const std::size_t> note_counts);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf1 prf1(const std::vector<bool>& predictions, const std::vector<bool>& labels);

struct ThemeEvalReport {
  std::size_t classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // rows truth, columns prediction
  std::vector<double> per_class_f1;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;

  nlohmann::json to_json() const;
  std::string confusion_csv() const;
};

ThemeEvalReport theme_eval(std::span<const int> predicted, std::span<const int> truth,
                           std::size_t classes);

/// One row of the model comparison table.
struct ModelScores {
  std::string model;
  BleuReport bleu;
  double alignment = -1.0;  // negative when not applicable
};

nlohmann::json to_json(const ModelScores& scores);
/// Fixed-width table: model, BLEU2 mean +- std, BLEU4 mean +- std, alignment.
std::string format_score_table(const std::vector<ModelScores>& rows);

}  // namespace lyricgan
