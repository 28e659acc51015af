#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lyricgan/corpus.hpp"

namespace lyricgan {

/// One LDA document: a song's words after stop-word removal.
struct Document {
  std::string name;
  std::vector<std::string> words;
};

/// Joins syllables into words (a trailing '-' continues a word), lowercases,
/// removes stop-words, and groups lines into one document per song in order
/// of first appearance. Songs left empty are dropped with a warning.
std::vector<Document> preprocess(const std::vector<LyricMelodyLine>& lines,
                                 const std::vector<std::string>& stopwords);

/// Words of a single syllable sequence, same rules as preprocess.
std::vector<std::string> line_words(const std::vector<std::string>& syllables,
                                    const std::vector<std::string>& stopwords);

std::vector<std::string> load_stopwords(const std::filesystem::path& path);

class WordVectorTable {
 public:
  /// Text format: optional "count dim" header, then "word f1 ... fD" per line.
  static WordVectorTable load(const std::filesystem::path& path);

  void add(const std::string& word, std::vector<double> vec);
  std::optional<std::span<const double>> find(const std::string& word) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct LdaOptions {
  std::size_t n_topics = 5;
  double alpha = -1.0;  // negative: 50 / n_topics
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  std::size_t top_k = 10;
  /// Called after every Gibbs sweep.
  std::function<void(std::size_t iteration, const class ThemeModel&)> on_iteration;
};

class ThemeModel {
 public:
  std::size_t n_topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> vocabulary;
  std::unordered_map<std::string, int> word_index;
  std::vector<std::vector<int>> topic_word;  // n_topics x W
  std::vector<int> topic_totals;
  std::vector<std::string> doc_names;
  std::vector<std::vector<int>> doc_topic;   // D x n_topics
  std::vector<std::vector<int>> assignments;  // topic of every token, per document
  std::vector<std::vector<std::string>> top_words;
  std::vector<std::vector<double>> embeddings;  // per topic, empty until theme_embeddings()
  std::vector<std::string> labels;
  std::map<std::string, int> song_themes;

  std::size_t vocab_size() const { return vocabulary.size(); }
  /// (count + beta) / (total + W * beta)
  double word_probability(std::size_t topic, int word) const;
  /// Top-k words of one topic ranked by word_probability (ties: lower word id).
  std::vector<std::string> rank_words(std::size_t topic, std::size_t k) const;
  std::size_t total_tokens() const;

  nlohmann::json to_json() const;
  static ThemeModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ThemeModel load(const std::filesystem::path& path);
};

/// Collapsed Gibbs sampling. Deterministic for a given seed.
ThemeModel fit_lda(const std::vector<Document>& docs, const LdaOptions& options);

/// Topic mixture of an unseen bag of words by maximum-likelihood EM with the
/// topic-word distributions fixed (no prior, so scaling counts changes nothing).
std::vector<double> infer_topic_mixture(const ThemeModel& model,
                                        const std::vector<std::string>& words);

/// Argmax of the inferred mixture per document, ties to the lowest id.
std::vector<int> assign_song_theme(const ThemeModel& model, const std::vector<Document>& docs);
int infer_theme(const ThemeModel& model, const std::vector<std::string>& words);

/// exp(-mean per-token log-likelihood) with topic mixtures folded in by Gibbs
/// sampling against the fixed topic-word counts. Unknown words are skipped.
double perplexity(const ThemeModel& model, const std::vector<Document>& docs,
                  std::size_t fold_in_iterations = 50, std::uint64_t seed = 7);

/// UMass coherence of each topic's top_words against document co-occurrence.
std::vector<double> coherence_umass(const ThemeModel& model, const std::vector<Document>& docs);
/// UMass coherence of an explicit ranked word list.
double coherence_umass(const std::vector<std::string>& ranked_words,
                       const std::vector<Document>& docs);

/// Mean of the available top-k word vectors per topic; throws if a topic has none.
std::vector<std::vector<double>> theme_embeddings(const ThemeModel& model,
                                                 const WordVectorTable& vectors,
                                                 std::size_t k = 10);
std::vector<double> theme_embedding(const std::vector<std::string>& top_words,
                                    const WordVectorTable& vectors);

struct TopicSelectionRow {
  std::size_t n_topics = 0;
  double perplexity = 0.0;
  double mean_coherence = 0.0;
};

/// Fits one model per topic count and scores it on held-out documents.
std::vector<TopicSelectionRow> select_topic_count(const std::vector<Document>& train,
                                                  const std::vector<Document>& heldout,
                                                  std::size_t min_topics, std::size_t max_topics,
                                                  LdaOptions options);

}  // namespace lyricgan
