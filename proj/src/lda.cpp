#include "lyricgan/lda.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "lyricgan/log.hpp"

namespace lyricgan {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

int sample_index(const std::vector<double>& weights, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, total);
  double r = unit(rng);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    r -= weights[k];
    if (r < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace

std::vector<std::string> line_words(const std::vector<std::string>& syllables,
                                    const std::vector<std::string>& stopwords) {
  const std::unordered_set<std::string> stop(stopwords.begin(), stopwords.end());
  std::vector<std::string> words;
  std::string current;
  for (const auto& syl : syllables) {
    if (!syl.empty() && syl.back() == '-') {
      current += syl.substr(0, syl.size() - 1);
      continue;
    }
    current += syl;
    auto word = lowercase(std::move(current));
    current.clear();
    if (!word.empty() && !stop.contains(word)) words.push_back(std::move(word));
  }
  if (!current.empty()) {
    auto word = lowercase(std::move(current));
    if (!stop.contains(word)) words.push_back(std::move(word));
  }
  return words;
}

std::vector<Document> preprocess(const std::vector<LyricMelodyLine>& lines,
                                 const std::vector<std::string>& stopwords) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& line : lines) {
    auto [it, inserted] = index.emplace(line.song_id, docs.size());
    if (inserted) docs.push_back({line.song_id, {}});
    auto words = line_words(line.syllables, stopwords);
    auto& doc = docs[it->second].words;
    doc.insert(doc.end(), words.begin(), words.end());
  }
  const auto before = docs.size();
  std::erase_if(docs, [](const Document& d) { return d.words.empty(); });
  if (docs.size() != before) {
    log::warn("excluded " + std::to_string(before - docs.size()) +
              " songs left empty after stop-word removal");
  }
  return docs;
}

std::vector<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stop-word list " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string w;
    if (fields >> w) words.push_back(lowercase(w));
  }
  return words;
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vectors " + path.string());
  WordVectorTable table;
  std::string line;
  bool first = true;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> vec;
    double v = 0.0;
    while (fields >> v) vec.push_back(v);
    if (first) {
      first = false;
      // A "count dim" header has a numeric first field and exactly one more value.
      char* end = nullptr;
      std::strtoul(word.c_str(), &end, 10);
      if (end != nullptr && *end == '\0' && vec.size() == 1) continue;
    }
    if (vec.empty()) {
      throw std::runtime_error("word vector line " + std::to_string(number) + " has no values");
    }
    table.add(word, std::move(vec));
  }
  return table;
}

void WordVectorTable::add(const std::string& word, std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw std::runtime_error("word vector for '" + word + "' has dimension " +
                             std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
  }
  vectors_[word] = std::move(vec);
}

std::optional<std::span<const double>> WordVectorTable::find(const std::string& word) const {
  auto it = vectors_.find(word);
  if (it == vectors_.end()) return std::nullopt;
  return std::span<const double>(it->second);
}

double ThemeModel::word_probability(std::size_t topic, int word) const {
  return (topic_word[topic][static_cast<std::size_t>(word)] + beta) /
         (topic_totals[topic] + static_cast<double>(vocab_size()) * beta);
}

std::vector<std::string> ThemeModel::rank_words(std::size_t topic, std::size_t k) const {
  std::vector<int> ids(vocab_size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return topic_word[topic][static_cast<std::size_t>(a)] >
           topic_word[topic][static_cast<std::size_t>(b)];
  });
  ids.resize(std::min(k, ids.size()));
  std::vector<std::string> words;
  for (int id : ids) words.push_back(vocabulary[static_cast<std::size_t>(id)]);
  return words;
}

std::size_t ThemeModel::total_tokens() const {
  return std::accumulate(topic_totals.begin(), topic_totals.end(), std::size_t{0});
}

nlohmann::json ThemeModel::to_json() const {
  nlohmann::json j;
  j["n_topics"] = n_topics;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["vocabulary"] = vocabulary;
  j["topic_word"] = topic_word;
  j["doc_names"] = doc_names;
  j["doc_topic"] = doc_topic;
  j["top_words"] = top_words;
  j["embeddings"] = embeddings;
  j["labels"] = labels;
  j["song_themes"] = song_themes;
  return j;
}

ThemeModel ThemeModel::from_json(const nlohmann::json& j) {
  ThemeModel m;
  m.n_topics = j.at("n_topics").get<std::size_t>();
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) {
    m.word_index[m.vocabulary[i]] = static_cast<int>(i);
  }
  m.topic_word = j.at("topic_word").get<std::vector<std::vector<int>>>();
  m.topic_totals.assign(m.n_topics, 0);
  for (std::size_t k = 0; k < m.n_topics; ++k) {
    m.topic_totals[k] = std::accumulate(m.topic_word.at(k).begin(), m.topic_word[k].end(), 0);
  }
  m.doc_names = j.at("doc_names").get<std::vector<std::string>>();
  m.doc_topic = j.at("doc_topic").get<std::vector<std::vector<int>>>();
  m.top_words = j.at("top_words").get<std::vector<std::vector<std::string>>>();
  m.embeddings = j.at("embeddings").get<std::vector<std::vector<double>>>();
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.song_themes = j.at("song_themes").get<std::map<std::string, int>>();
  return m;
}

void ThemeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write theme model " + path.string());
  out << to_json().dump(1) << '\n';
}

ThemeModel ThemeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open theme model " + path.string());
  return from_json(nlohmann::json::parse(in));
}

ThemeModel fit_lda(const std::vector<Document>& docs, const LdaOptions& options) {
  if (docs.empty()) throw std::invalid_argument("LDA needs at least one document");
  if (options.n_topics < 1) throw std::invalid_argument("LDA needs at least one topic");
  ThemeModel m;
  m.n_topics = options.n_topics;
  m.alpha = options.alpha > 0 ? options.alpha : 50.0 / static_cast<double>(options.n_topics);
  m.beta = options.beta;

  std::vector<std::vector<int>> tokens;
  for (const auto& doc : docs) {
    m.doc_names.push_back(doc.name);
    std::vector<int> ids;
    for (const auto& w : doc.words) {
      auto [it, inserted] = m.word_index.emplace(w, static_cast<int>(m.vocabulary.size()));
      if (inserted) m.vocabulary.push_back(w);
      ids.push_back(it->second);
    }
    tokens.push_back(std::move(ids));
  }
  const std::size_t n_words = m.vocabulary.size();
  const std::size_t n_topics = m.n_topics;
  m.topic_word.assign(n_topics, std::vector<int>(n_words, 0));
  m.topic_totals.assign(n_topics, 0);
  m.doc_topic.assign(docs.size(), std::vector<int>(n_topics, 0));
  m.assignments.resize(docs.size());

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> initial(0, static_cast<int>(n_topics) - 1);
  for (std::size_t d = 0; d < tokens.size(); ++d) {
    for (int w : tokens[d]) {
      const int z = initial(rng);
      m.assignments[d].push_back(z);
      ++m.topic_word[static_cast<std::size_t>(z)][static_cast<std::size_t>(w)];
      ++m.topic_totals[static_cast<std::size_t>(z)];
      ++m.doc_topic[d][static_cast<std::size_t>(z)];
    }
  }

  const double w_beta = static_cast<double>(n_words) * m.beta;
  std::vector<double> weights(n_topics);
  for (std::size_t iter = 0; iter < options.iterations; ++iter) {
    for (std::size_t d = 0; d < tokens.size(); ++d) {
      for (std::size_t i = 0; i < tokens[d].size(); ++i) {
        const auto w = static_cast<std::size_t>(tokens[d][i]);
        auto z = static_cast<std::size_t>(m.assignments[d][i]);
        --m.topic_word[z][w];
        --m.topic_totals[z];
        --m.doc_topic[d][z];
        double total = 0.0;
        for (std::size_t k = 0; k < n_topics; ++k) {
          weights[k] = (m.topic_word[k][w] + m.beta) / (m.topic_totals[k] + w_beta) *
                       (m.doc_topic[d][k] + m.alpha);
          total += weights[k];
        }
        z = static_cast<std::size_t>(sample_index(weights, total, rng));
        m.assignments[d][i] = static_cast<int>(z);
        ++m.topic_word[z][w];
        ++m.topic_totals[z];
        ++m.doc_topic[d][z];
      }
    }
    if (options.on_iteration) options.on_iteration(iter, m);
  }

  for (std::size_t k = 0; k < n_topics; ++k) m.top_words.push_back(m.rank_words(k, options.top_k));
  m.labels.assign(n_topics, "");
  for (std::size_t k = 0; k < n_topics; ++k) m.labels[k] = "theme " + std::to_string(k);
  return m;
}

std::vector<double> infer_topic_mixture(const ThemeModel& model,
                                        const std::vector<std::string>& words) {
  const std::size_t n_topics = model.n_topics;
  std::vector<double> theta(n_topics, 1.0 / static_cast<double>(n_topics));
  std::map<int, int> counts;
  for (const auto& w : words) {
    auto it = model.word_index.find(w);
    if (it != model.word_index.end()) ++counts[it->second];
  }
  if (counts.empty()) return theta;
  std::vector<std::pair<std::vector<double>, int>> phi;
  double n = 0.0;
  for (const auto& [w, c] : counts) {
    std::vector<double> column(n_topics);
    for (std::size_t k = 0; k < n_topics; ++k) column[k] = model.word_probability(k, w);
    phi.emplace_back(std::move(column), c);
    n += c;
  }
  std::vector<double> next(n_topics);
  for (int iter = 0; iter < 200; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const auto& [column, c] : phi) {
      double z = 0.0;
      for (std::size_t k = 0; k < n_topics; ++k) z += theta[k] * column[k];
      for (std::size_t k = 0; k < n_topics; ++k) next[k] += c * theta[k] * column[k] / z;
    }
    for (std::size_t k = 0; k < n_topics; ++k) theta[k] = next[k] / n;
  }
  return theta;
}

int infer_theme(const ThemeModel& model, const std::vector<std::string>& words) {
  return argmax_lowest(infer_topic_mixture(model, words));
}

std::vector<int> assign_song_theme(const ThemeModel& model, const std::vector<Document>& docs) {
  std::vector<int> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) out.push_back(infer_theme(model, doc.words));
  return out;
}

double perplexity(const ThemeModel& model, const std::vector<Document>& docs,
                  std::size_t fold_in_iterations, std::uint64_t seed) {
  const std::size_t n_topics = model.n_topics;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> initial(0, static_cast<int>(n_topics) - 1);
  std::vector<double> weights(n_topics);
  double log_likelihood = 0.0;
  std::size_t n_tokens = 0;
  for (const auto& doc : docs) {
    std::vector<int> ids;
    for (const auto& w : doc.words) {
      auto it = model.word_index.find(w);
      if (it != model.word_index.end()) ids.push_back(it->second);
    }
    if (ids.empty()) continue;
    std::vector<int> z(ids.size());
    std::vector<int> counts(n_topics, 0);
    for (auto& t : z) {
      t = initial(rng);
      ++counts[static_cast<std::size_t>(t)];
    }
    for (std::size_t iter = 0; iter < fold_in_iterations; ++iter) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        --counts[static_cast<std::size_t>(z[i])];
        double total = 0.0;
        for (std::size_t k = 0; k < n_topics; ++k) {
          weights[k] = model.word_probability(k, ids[i]) * (counts[k] + model.alpha);
          total += weights[k];
        }
        z[i] = sample_index(weights, total, rng);
        ++counts[static_cast<std::size_t>(z[i])];
      }
    }
    const double denom = static_cast<double>(ids.size()) + n_topics * model.alpha;
    for (int w : ids) {
      double p = 0.0;
      for (std::size_t k = 0; k < n_topics; ++k) {
        p += (counts[k] + model.alpha) / denom * model.word_probability(k, w);
      }
      log_likelihood += std::log(p);
    }
    n_tokens += ids.size();
  }
  if (n_tokens == 0) throw std::invalid_argument("perplexity needs at least one known token");
  return std::exp(-log_likelihood / static_cast<double>(n_tokens));
}

double coherence_umass(const std::vector<std::string>& ranked_words,
                       const std::vector<Document>& docs) {
  std::vector<std::unordered_set<std::string>> doc_sets;
  doc_sets.reserve(docs.size());
  for (const auto& d : docs) doc_sets.emplace_back(d.words.begin(), d.words.end());
  auto doc_freq = [&](const std::string& a) {
    int n = 0;
    for (const auto& s : doc_sets) n += s.contains(a) ? 1 : 0;
    return n;
  };
  auto co_freq = [&](const std::string& a, const std::string& b) {
    int n = 0;
    for (const auto& s : doc_sets) n += (s.contains(a) && s.contains(b)) ? 1 : 0;
    return n;
  };
  double score = 0.0;
  for (std::size_t i = 1; i < ranked_words.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const int dj = doc_freq(ranked_words[j]);
      if (dj == 0) continue;
      score += std::log((co_freq(ranked_words[i], ranked_words[j]) + 1.0) / dj);
    }
  }
  return score;
}

std::vector<double> coherence_umass(const ThemeModel& model, const std::vector<Document>& docs) {
  std::vector<double> out;
  for (const auto& words : model.top_words) out.push_back(coherence_umass(words, docs));
  return out;
}

std::vector<double> theme_embedding(const std::vector<std::string>& top_words,
                                    const WordVectorTable& vectors) {
  std::vector<double> mean(vectors.dim(), 0.0);
  std::size_t found = 0;
  for (const auto& w : top_words) {
    auto vec = vectors.find(w);
    if (!vec) {
      log::warn("no word vector for top word '" + w + "', skipped");
      continue;
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*vec)[i];
    ++found;
  }
  if (found == 0) throw std::runtime_error("none of the top words have word vectors");
  for (double& v : mean) v /= static_cast<double>(found);
  return mean;
}

std::vector<std::vector<double>> theme_embeddings(const ThemeModel& model,
                                                  const WordVectorTable& vectors, std::size_t k) {
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < model.n_topics; ++t) {
    out.push_back(theme_embedding(model.rank_words(t, k), vectors));
  }
  return out;
}

std::vector<TopicSelectionRow> select_topic_count(const std::vector<Document>& train,
                                                  const std::vector<Document>& heldout,
                                                  std::size_t min_topics, std::size_t max_topics,
                                                  LdaOptions options) {
  std::vector<TopicSelectionRow> rows;
  for (std::size_t n = min_topics; n <= max_topics; ++n) {
    options.n_topics = n;
    options.alpha = -1.0;
    const auto model = fit_lda(train, options);
    const auto coherence = coherence_umass(model, train);
    TopicSelectionRow row;
    row.n_topics = n;
    row.perplexity = perplexity(model, heldout);
    row.mean_coherence =
        std::accumulate(coherence.begin(), coherence.end(), 0.0) / static_cast<double>(n);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lyricgan
