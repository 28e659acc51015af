#include "lyricgan/pipeline.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "lyricgan/log.hpp"

namespace lyricgan {

PreparedCorpus prepare_corpus(std::vector<LyricMelodyLine> lines, std::uint64_t seed,
                              std::size_t length_cap) {
  if (lines.empty()) throw CorpusError("corpus is empty");
  PreparedCorpus out;
  out.max_len = default_max_len(lines, length_cap);
  out.dropped = drop_long_lines(lines, out.max_len);
  out.vocab = build_vocabs(lines);
  out.splits = split_corpus(std::move(lines), seed);
  return out;
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + path.string());
  return nlohmann::json::parse(in);
}

nlohmann::json line_ids(const std::vector<LyricMelodyLine>& lines) {
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& l : lines) ids.push_back(l.id());
  return ids;
}

}  // namespace

void save_prepared(const std::filesystem::path& dir, const PreparedCorpus& corpus,
                   const nlohmann::json& meta) {
  std::filesystem::create_directories(dir);
  write_json(dir / "vocab.json", corpus.vocab.to_json());
  write_json(dir / "splits.json", {{"train", line_ids(corpus.splits.train)},
                                   {"valid", line_ids(corpus.splits.valid)},
                                   {"test", line_ids(corpus.splits.test)}});
  save_corpus(dir / "train.jsonl", corpus.splits.train);
  save_corpus(dir / "valid.jsonl", corpus.splits.valid);
  save_corpus(dir / "test.jsonl", corpus.splits.test);
  nlohmann::json info = meta;
  info["max_len"] = corpus.max_len;
  info["dropped_long_lines"] = corpus.dropped;
  info["vocab_hash"] = corpus.vocab.hash();
  info["counts"] = {{"train", corpus.splits.train.size()},
                    {"valid", corpus.splits.valid.size()},
                    {"test", corpus.splits.test.size()},
                    {"syllables", corpus.vocab.syllable_count()},
                    {"notes", corpus.vocab.note_count()}};
  write_json(dir / "prepare.json", info);
}

PreparedCorpus load_prepared(const std::filesystem::path& dir, nlohmann::json* meta) {
  PreparedCorpus corpus;
  const auto info = read_json(dir / "prepare.json");
  corpus.vocab = Vocab::from_json(read_json(dir / "vocab.json"));
  corpus.max_len = info.at("max_len").get<std::size_t>();
  corpus.dropped = info.value("dropped_long_lines", std::size_t{0});
  for (const char* split : {"train", "valid", "test"}) {
    const auto path = dir / (std::string(split) + ".jsonl");
    if (!std::filesystem::exists(path)) throw std::runtime_error("missing " + path.string());
  }
  corpus.splits.train = load_corpus(dir / "train.jsonl");
  corpus.splits.valid = load_corpus(dir / "valid.jsonl");
  corpus.splits.test = load_corpus(dir / "test.jsonl");
  if (meta != nullptr) *meta = info;
  return corpus;
}

ThemeModel fit_theme_model(const std::vector<LyricMelodyLine>& lines,
                           const std::vector<std::string>& stopwords,
                           const WordVectorTable& vectors, const LdaOptions& options) {
  const auto docs = preprocess(lines, stopwords);
  ThemeModel model = fit_lda(docs, options);
  const auto assigned = assign_song_theme(model, docs);
  for (std::size_t d = 0; d < docs.size(); ++d) model.song_themes[docs[d].name] = assigned[d];
  model.embeddings = theme_embeddings(model, vectors, options.top_k);
  return model;
}

TrainingSet make_training_set(ConditioningMode mode, const PreparedCorpus& corpus,
                              const ThemeModel* themes) {
  if (uses_theme(mode) && (themes == nullptr || themes->embeddings.empty())) {
    throw std::invalid_argument("themed training needs a theme model; run lda first");
  }
  TrainingSet set;
  set.mode = mode;
  set.max_len = corpus.max_len;
  if (uses_theme(mode)) set.theme_vectors = themes->embeddings;
  auto encode = [&](const std::vector<LyricMelodyLine>& lines) {
    std::vector<EncodedRow> rows;
    rows.reserve(lines.size());
    for (const auto& line : lines) {
      auto row = encode_line(line, corpus.vocab, corpus.max_len);
      if (themes != nullptr) {
        const auto it = themes->song_themes.find(line.song_id);
        if (it != themes->song_themes.end()) row.theme = it->second;
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  set.train = encode(corpus.splits.train);
  set.valid = encode(corpus.splits.valid);
  return set;
}

ModelScores score_lines(const std::string& name, const std::vector<std::vector<int>>& lines,
                        const BleuReferencePool& pool,
                        const std::vector<std::size_t>& melody_counts) {
  ModelScores s;
  s.model = name;
  s.bleu = corpus_bleu_stats(lines, pool);
  if (!melody_counts.empty()) {
    std::vector<std::size_t> counts;
    counts.reserve(lines.size());
    for (const auto& l : lines) counts.push_back(l.size());
    s.alignment = alignment_ratio(counts, melody_counts);
  }
  return s;
}

std::vector<std::vector<int>> generate_lines(const Generator& gen, const TrainingSet& data,
                                             const std::vector<EncodedRow>& rows,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> out;
  for (const auto& row : gen.sample(data.contexts(rows), data.max_len, rng)) {
    out.push_back(content_ids(row));
  }
  return out;
}

std::vector<std::vector<int>> bigram_lines(const BigramTable& table, std::size_t count,
                                           std::size_t max_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_bigram(table, rng, max_len));
  return out;
}

std::vector<std::vector<int>> mc_bigram_lines(const McBigramTable& table,
                                              const BigramTable& fallback,
                                              const std::vector<EncodedRow>& rows,
                                              std::uint64_t seed, McSampleStats* stats) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    out.push_back(sample_mc_bigram(table, fallback, content_ids(row.notes), rng, stats));
  }
  return out;
}

std::vector<std::size_t> note_counts(const std::vector<EncodedRow>& rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(static_cast<std::size_t>(r.length) - 2);
  return out;
}

ThemeEvalReport theme_experiment(const Generator& gen, const TrainingSet& data,
                                 const std::vector<EncodedRow>& rows, const ThemeModel& themes,
                                 const Vocab& vocab, const std::vector<std::string>& stopwords,
                                 const ThemeExperiment& options) {
  if (!uses_theme(gen.config().mode)) {
    throw std::invalid_argument("theme experiment needs a themed generator");
  }
  if (rows.empty()) throw std::invalid_argument("theme experiment needs melodies");
  std::mt19937_64 rng(options.seed);
  std::vector<int> predicted;
  std::vector<int> truth;
  std::size_t next_row = 0;
  for (std::size_t theme = 0; theme < themes.n_topics; ++theme) {
    for (std::size_t g = 0; g < options.groups_per_theme; ++g) {
      std::vector<GenerationContext> contexts;
      for (std::size_t l = 0; l < options.lines_per_group; ++l) {
        GenerationContext ctx = data.context(rows[next_row++ % rows.size()]);
        ctx.theme = themes.embeddings.at(theme);
        contexts.push_back(std::move(ctx));
      }
      std::vector<std::string> words;
      for (const auto& line : gen.sample(contexts, data.max_len, rng)) {
        const auto w = line_words(decode_lyrics(line, vocab), stopwords);
        words.insert(words.end(), w.begin(), w.end());
      }
      predicted.push_back(infer_theme(themes, words));
      truth.push_back(static_cast<int>(theme));
    }
  }
  return theme_eval(predicted, truth, themes.n_topics);
}

}  // namespace lyricgan
