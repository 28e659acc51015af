#include "lyricgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace lyricgan {

namespace {

std::map<std::vector<int>, int> ngram_counts(std::span<const int> tokens, std::size_t n) {
  std::map<std::vector<int>, int> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<int>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                            tokens.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1;
  }
  return counts;
}

}  // namespace

BleuReferencePool::BleuReferencePool(const std::vector<std::vector<int>>& references,
                                     std::size_t max_n)
    : max_n_(max_n) {
  if (references.empty()) throw std::invalid_argument("BLEU needs at least one reference");
  if (max_n == 0) throw std::invalid_argument("BLEU order must be positive");
  for (const auto& ref : references) {
    lengths_.push_back(ref.size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      for (const auto& [gram, count] : ngram_counts(ref, n)) {
        int& best = max_counts_[gram];
        best = std::max(best, count);
      }
    }
  }
  std::sort(lengths_.begin(), lengths_.end());
}

int BleuReferencePool::max_count(const std::vector<int>& ngram) const {
  const auto it = max_counts_.find(ngram);
  return it == max_counts_.end() ? 0 : it->second;
}

std::size_t BleuReferencePool::closest_length(std::size_t length) const {
  const auto it = std::lower_bound(lengths_.begin(), lengths_.end(), length);
  if (it == lengths_.end()) return lengths_.back();
  if (*it == length || it == lengths_.begin()) return *it;
  const std::size_t above = *it;
  const std::size_t below = *std::prev(it);
  return (length - below) <= (above - length) ? below : above;
}

double BleuReferencePool::score(std::span<const int> candidate, std::size_t n) const {
  if (n == 0 || n > max_n_) throw std::invalid_argument("BLEU order outside the pool's range");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    int matched = 0;
    int total = 0;
    for (const auto& [gram, count] : ngram_counts(candidate, k)) {
      matched += std::min(count, max_count(gram));
      total += count;
    }
    const double numerator = matched > 0 ? matched : kBleuEpsilon;
    log_sum += std::log(numerator / std::max(total, 1));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(closest_length(candidate.size()));
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum / static_cast<double>(n));
}

double bleu_cumulative(std::span<const int> candidate,
                       const std::vector<std::vector<int>>& references, std::size_t max_n) {
  if (candidate.empty()) return 0.0;
  return BleuReferencePool(references, max_n).score(candidate, max_n);
}

ScoreSummary summarize(std::vector<double> scores) {
  ScoreSummary s;
  s.per_line = std::move(scores);
  if (s.per_line.empty()) return s;
  const double n = static_cast<double>(s.per_line.size());
  s.mean = std::accumulate(s.per_line.begin(), s.per_line.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : s.per_line) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / n);
  return s;
}

BleuReport corpus_bleu_stats(const std::vector<std::vector<int>>& generated,
                             const BleuReferencePool& pool) {
  std::vector<double> b2;
  std::vector<double> b4;
  b2.reserve(generated.size());
  b4.reserve(generated.size());
  for (const auto& line : generated) {
    b2.push_back(pool.score(line, 2));
    b4.push_back(pool.score(line, 4));
  }
  return {summarize(std::move(b2)), summarize(std::move(b4))};
}

std::vector<std::vector<int>> cap_references(std::vector<std::vector<int>> references,
                                             std::size_t cap, std::uint64_t seed) {
  if (references.size() <= cap) return references;
  std::vector<std::size_t> order(references.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(cap);
  std::sort(order.begin(), order.end());
  std::vector<std::vector<int>> out;
  out.reserve(cap);
  for (std::size_t i : order) out.push_back(std::move(references[i]));
  return out;
}

double alignment_ratio(std::span<const std::size_t> syllable_counts,
                       std::span<const std::size_t> note_counts) {
  if (syllable_counts.size() != note_counts.size()) {
    throw std::invalid_argument("alignment needs one melody per line");
  }
  if (syllable_counts.empty()) throw std::invalid_argument("alignment of an empty set is undefined");
  std::size_t matched = 0;
  for (std::size_t i = 0; i < syllable_counts.size(); ++i) {
    matched += syllable_counts[i] == note_counts[i] ? 1 : 0;
  }
  return static_cast<double>(matched) / static_cast<double>(syllable_counts.size());
}

Prf1 prf1(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("predictions and labels differ in length");
  }
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] && labels[i]) tp += 1;
    if (predictions[i] && !labels[i]) fp += 1;
    if (!predictions[i] && labels[i]) fn += 1;
  }
  Prf1 out;
  out.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0 ? 2 * out.precision * out.recall / denom : 0.0;
  return out;
}

ThemeEvalReport theme_eval(std::span<const int> predicted, std::span<const int> truth,
                           std::size_t classes) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("predicted and true themes differ in length");
  }
  if (classes == 0) throw std::invalid_argument("theme evaluation needs at least one class");
  ThemeEvalReport r;
  r.classes = classes;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int id : {predicted[i], truth[i]}) {
      if (id < 0 || static_cast<std::size_t>(id) >= classes) {
        throw std::invalid_argument("theme id " + std::to_string(id) + " outside 0.." +
                                    std::to_string(classes - 1));
      }
    }
    r.confusion[truth[i]][predicted[i]] += 1;
  }
  double correct = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    double tp = r.confusion[k][k];
    double support = 0, predicted_k = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      support += r.confusion[k][j];
      predicted_k += r.confusion[j][k];
    }
    const double p = predicted_k > 0 ? tp / predicted_k : 0.0;
    const double rc = support > 0 ? tp / support : 0.0;
    r.per_class_f1.push_back(p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0);
    correct += tp;
  }
  const double n = static_cast<double>(truth.size());
  r.accuracy = n > 0 ? correct / n : 0.0;
  // Single-label: pooled precision = pooled recall = accuracy.
  r.micro_f1 = r.accuracy;
  r.macro_f1 = std::accumulate(r.per_class_f1.begin(), r.per_class_f1.end(), 0.0) /
               static_cast<double>(classes);
  return r;
}

nlohmann::json ThemeEvalReport::to_json() const {
  return {{"classes", classes},     {"accuracy", accuracy}, {"macro_f1", macro_f1},
          {"micro_f1", micro_f1},   {"per_class_f1", per_class_f1},
          {"confusion", confusion}};
}

std::string ThemeEvalReport::confusion_csv() const {
  std::ostringstream out;
  out << "truth\\predicted";
  for (std::size_t k = 0; k < classes; ++k) out << ',' << k;
  out << '\n';
  for (std::size_t i = 0; i < classes; ++i) {
    out << i;
    for (std::size_t j = 0; j < classes; ++j) out << ',' << confusion[i][j];
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const ModelScores& s) {
  nlohmann::json j = {{"model", s.model},
                      {"bleu2_mean", s.bleu.bleu2.mean},
                      {"bleu2_std", s.bleu.bleu2.stddev},
                      {"bleu4_mean", s.bleu.bleu4.mean},
                      {"bleu4_std", s.bleu.bleu4.stddev},
                      {"lines", s.bleu.bleu2.per_line.size()}};
  j["alignment"] = s.alignment < 0 ? nlohmann::json(nullptr) : nlohmann::json(s.alignment);
  return j;
}

std::string format_score_table(const std::vector<ModelScores>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.model.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "Model" << "  "
      << std::setw(17) << "BLEU2" << "  " << std::setw(17) << "BLEU4" << "  Alignment\n";
  out << std::string(width + 49, '-') << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    std::ostringstream b2, b4;
    b2 << std::fixed << std::setprecision(3) << r.bleu.bleu2.mean << " +- " << r.bleu.bleu2.stddev;
    b4 << std::fixed << std::setprecision(3) << r.bleu.bleu4.mean << " +- " << r.bleu.bleu4.stddev;
    out << std::left << std::setw(static_cast<int>(width)) << r.model << "  " << std::setw(17)
        << b2.str() << "  " << std::setw(17) << b4.str() << "  ";
    if (r.alignment < 0) {
      out << "-";
    } else {
      out << r.alignment;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace lyricgan
