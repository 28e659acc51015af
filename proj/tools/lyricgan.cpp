// Command-line workflow: synth, prepare, lda, train, generate, evaluate, serve.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "lyricgan/checkpoint.hpp"
#include "lyricgan/log.hpp"
#include "lyricgan/pipeline.hpp"
#include "lyricgan/run_config.hpp"
#include "lyricgan/service.hpp"
#include "lyricgan/synth.hpp"

namespace fs = std::filesystem;
using namespace lyricgan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFailure = 1;
constexpr int kExitAborted = 3;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + path.string());
  return nlohmann::json::parse(in);
}

std::vector<std::string> stopwords_for(const RunConfig& cfg) {
  if (cfg.paths.stopwords.empty()) return synth_stopwords();
  return load_stopwords(cfg.paths.stopwords);
}

// Exclusive training lock on a checkpoint directory, removed on scope exit.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw std::runtime_error("checkpoint directory " + dir.string() +
                               " is locked by another training run (remove " + path_.string() +
                               " if stale)");
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

std::optional<ThemeModel> load_themes(const fs::path& data_dir) {
  const auto path = data_dir / "themes.json";
  if (!fs::exists(path)) return std::nullopt;
  return ThemeModel::load(path);
}

std::vector<EncodedRow> encode_rows(const std::vector<LyricMelodyLine>& lines,
                                    const PreparedCorpus& corpus) {
  std::vector<EncodedRow> rows;
  rows.reserve(lines.size());
  for (const auto& l : lines) rows.push_back(encode_line(l, corpus.vocab, corpus.max_len));
  return rows;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  fs::path vectors;
  fs::path stopwords;
  fs::path planted;
  std::size_t songs = 200;
  std::size_t lines = 12;
  std::size_t dim = 16;
  std::uint64_t seed = 7;
};

int cmd_synth(const SynthArgs& a) {
  const auto corpus = synth_corpus(a.seed, a.songs, a.lines);
  fs::create_directories(a.out.has_parent_path() ? a.out.parent_path() : fs::path("."));
  save_corpus(a.out, corpus.lines);
  if (!a.vectors.empty()) write_synth_word_vectors(a.vectors, a.dim, a.seed);
  if (!a.stopwords.empty()) {
    std::string text;
    for (const auto& w : synth_stopwords()) text += w + "\n";
    write_text(a.stopwords, text);
  }
  if (!a.planted.empty()) {
    write_json(a.planted, {{"seed", a.seed}, {"labels", synth_theme_labels()},
                           {"songs", corpus.planted_theme}});
  }
  std::cout << "wrote " << corpus.lines.size() << " lines from " << a.songs << " songs to "
            << a.out.string() << "\n";
  return 0;
}

// ---- prepare ----------------------------------------------------------------

int cmd_prepare(const RunConfig& cfg) {
  if (cfg.paths.corpus.empty()) throw std::invalid_argument("prepare needs --corpus");
  auto lines = load_corpus(cfg.paths.corpus);
  const std::size_t total = lines.size();
  const auto prepared = prepare_corpus(std::move(lines), cfg.seeds.split, cfg.length_cap);
  save_prepared(cfg.paths.data, prepared,
                {{"config_hash", cfg.hash()}, {"seeds", cfg.seed_record()}, {"lines_read", total}});
  std::cout << "lines " << total << " kept " << total - prepared.dropped << " dropped "
            << prepared.dropped << " | train " << prepared.splits.train.size() << " valid "
            << prepared.splits.valid.size() << " test " << prepared.splits.test.size()
            << " | syllables " << prepared.vocab.syllable_count() << " notes "
            << prepared.vocab.note_count() << " max_len " << prepared.max_len << "\n";
  return 0;
}

// ---- lda --------------------------------------------------------------------

std::vector<LyricMelodyLine> all_lines(const PreparedCorpus& c) {
  std::vector<LyricMelodyLine> lines = c.splits.train;
  lines.insert(lines.end(), c.splits.valid.begin(), c.splits.valid.end());
  lines.insert(lines.end(), c.splits.test.begin(), c.splits.test.end());
  // Song order must not depend on the split shuffle beyond the seed; sort by id.
  std::sort(lines.begin(), lines.end(), [](const auto& x, const auto& y) {
    return std::tie(x.song_id, x.line_index) < std::tie(y.song_id, y.line_index);
  });
  return lines;
}

int cmd_lda(const RunConfig& cfg, bool select) {
  if (cfg.paths.vectors.empty()) throw std::invalid_argument("lda needs --vectors");
  const auto corpus = load_prepared(cfg.paths.data);
  const auto lines = all_lines(corpus);
  const auto stopwords = stopwords_for(cfg);
  const auto vectors = WordVectorTable::load(cfg.paths.vectors);

  if (select) {
    auto docs = preprocess(lines, stopwords);
    std::mt19937_64 rng(cfg.lda.seed);
    std::shuffle(docs.begin(), docs.end(), rng);
    const std::size_t n_held = std::max<std::size_t>(1, docs.size() / 5);
    const std::vector<Document> held(docs.begin(), docs.begin() + static_cast<long>(n_held));
    const std::vector<Document> train(docs.begin() + static_cast<long>(n_held), docs.end());
    const auto rows = select_topic_count(train, held, 2, 8, cfg.lda_options());
    nlohmann::json out = {{"config_hash", cfg.hash()}, {"seeds", cfg.seed_record()},
                          {"rows", nlohmann::json::array()}};
    std::cout << "topics  perplexity  coherence\n";
    for (const auto& r : rows) {
      out["rows"].push_back({{"n_topics", r.n_topics}, {"perplexity", r.perplexity},
                             {"mean_coherence", r.mean_coherence}});
      char buf[96];
      std::snprintf(buf, sizeof buf, "%6zu  %10.3f  %9.4f\n", r.n_topics, r.perplexity,
                    r.mean_coherence);
      std::cout << buf;
    }
    write_json(cfg.paths.data / "topic_selection.json", out);
  }

  auto model = fit_theme_model(lines, stopwords, vectors, cfg.lda_options());
  if (!cfg.lda.labels.empty()) model.labels = cfg.lda.labels;
  auto j = model.to_json();
  j["config_hash"] = cfg.hash();
  j["seeds"] = cfg.seed_record();
  write_json(cfg.paths.data / "themes.json", j);
  for (std::size_t k = 0; k < model.n_topics; ++k) {
    std::cout << k << " [" << model.labels[k] << "]:";
    for (const auto& w : model.top_words[k]) std::cout << " " << w;
    std::cout << "\n";
  }
  return 0;
}

// ---- train ------------------------------------------------------------------

enum class Phase { kMle, kAdv, kAll };

Phase parse_phase(const std::string& s) {
  if (s == "mle") return Phase::kMle;
  if (s == "adv") return Phase::kAdv;
  if (s == "all") return Phase::kAll;
  throw std::invalid_argument("phase must be mle, adv or all");
}

nlohmann::json artifact_metadata(const RunConfig& cfg, const PreparedCorpus& corpus,
                                 const std::string& phase) {
  return {{"config_hash", cfg.hash()},
          {"seeds", cfg.seed_record()},
          {"phase", phase},
          {"vocab_hash", corpus.vocab.hash()},
          {"max_len", corpus.max_len}};
}

int cmd_train(const RunConfig& cfg, Phase phase, bool keep_rounds) {
  const auto corpus = load_prepared(cfg.paths.data);
  const auto themes = load_themes(cfg.paths.data);
  if (uses_theme(cfg.mode) && !themes) {
    throw std::invalid_argument("mode tmc needs a theme model in " + cfg.paths.data.string() +
                                "; run `lyricgan lda` first");
  }
  const fs::path dir = cfg.paths.checkpoints / to_string(cfg.mode);
  const fs::path mle_path = dir / "generator_mle.ckpt";
  if (phase == Phase::kAdv && !fs::exists(mle_path)) {
    throw std::invalid_argument("adversarial phase needs " + mle_path.string() +
                                "; run --phase mle first");
  }
  DirectoryLock lock(dir);
  const auto data = make_training_set(cfg.mode, corpus, themes ? &*themes : nullptr);
  const fs::path log_path = dir / "train_log.jsonl";
  std::ofstream log_file(log_path, phase == Phase::kAdv ? std::ios::app : std::ios::trunc);
  const LogSink sink = [&](const LogRecord& r) { log_file << r.to_json().dump() << "\n" << std::flush; };

  nlohmann::json summary = {{"config_hash", cfg.hash()}, {"seeds", cfg.seed_record()},
                            {"mode", to_string(cfg.mode)}, {"config", cfg.to_json()}};
  summary["config"].erase("paths");
  const fs::path summary_path = dir / "train.json";
  if (phase == Phase::kAdv && fs::exists(summary_path)) {
    const auto previous = read_json(summary_path);
    if (previous.contains("mle")) summary["mle"] = previous["mle"];
  }

  Generator gen;
  if (phase != Phase::kAdv) {
    GeneratorConfig gc;
    gc.mode = cfg.mode;
    gc.lyric_vocab = corpus.vocab.syllable_count();
    gc.melody_vocab = corpus.vocab.note_count();
    gc.embedding_dim = cfg.embedding_dim;
    gc.hidden_dim = cfg.hidden_dim;
    gc.theme_dim = uses_theme(cfg.mode) ? data.theme_vectors.front().size() : 0;
    gen = Generator(gc, cfg.seeds.init);
    nn::Adam adam(cfg.train.adam);
    std::mt19937_64 rng(cfg.train.seed);
    const auto curve = mle_pretrain(gen, adam, data, cfg.train, rng, sink);
    const double val = validation_loss(gen, data, cfg.train.batch_size);
    auto meta = artifact_metadata(cfg, corpus, "mle");
    meta["epochs"] = curve.size();
    meta["validation_loss"] = val;
    save_generator(mle_path, gen, meta);
    summary["mle"] = {{"loss_curve", curve}, {"validation_loss", val},
                      {"parameters", gen.parameter_count()}};
    std::cout << "mle: " << curve.size() << " epochs, train loss " << curve.back()
              << ", validation loss " << val << " -> " << mle_path.string() << "\n";
  } else {
    nlohmann::json meta;
    gen = load_generator(mle_path, &meta);
    if (meta.value("vocab_hash", std::uint64_t{0}) != corpus.vocab.hash()) {
      throw std::invalid_argument(mle_path.string() + " was trained on other vocabularies");
    }
    if (gen.config().mode != cfg.mode) {
      throw std::invalid_argument(mle_path.string() + " is a " + to_string(gen.config().mode) +
                                  " generator");
    }
  }

  if (phase != Phase::kMle) {
    DiscriminatorConfig dc = cfg.discriminator;
    dc.vocab = corpus.vocab.syllable_count();
    Discriminator disc(dc, cfg.seeds.init + 1);
    nn::Adagrad adagrad(cfg.train.adagrad);
    std::mt19937_64 rng(cfg.train.seed + 1);
    const auto pre = disc_pretrain(disc, adagrad, gen, data, cfg.train, rng, sink);
    save_discriminator(dir / "discriminator_pre.ckpt", disc,
                       artifact_metadata(cfg, corpus, "disc"));

    const BleuReferencePool pool(
        cap_references(data.validation_references(), cfg.train.reference_cap, cfg.seeds.eval), 2);
    auto state = start_adversarial(std::move(gen), std::move(disc), data, pool, cfg.train);
    nlohmann::json rounds = nlohmann::json::array();
    for (std::size_t k = 0; k < cfg.train.adversarial_rounds; ++k) {
      const auto r = adversarial_loop(state, data, pool, cfg.train, 1, sink).front();
      rounds.push_back({{"round", r.round}, {"pg_loss", r.pg_loss}, {"disc_loss", r.disc_loss},
                        {"disc_f1", r.disc_f1}, {"bleu2", r.bleu2}});
      if (keep_rounds) {
        auto meta = artifact_metadata(cfg, corpus, "adv");
        meta["round"] = r.round;
        save_generator(dir / ("generator_round_" + std::to_string(r.round) + ".ckpt"), state.gen,
                       meta);
      }
    }
    auto meta = artifact_metadata(cfg, corpus, "adv");
    meta["best_round"] = state.best_round;
    meta["best_bleu2"] = state.best_bleu2;
    meta["mle_bleu2"] = state.mle_bleu2;
    save_generator(dir / "generator_adv.ckpt", state.best, meta);
    auto last = artifact_metadata(cfg, corpus, "adv");
    last["round"] = state.next_round - 1;
    last["rng"] = rng_state(state.rng);
    save_generator(dir / "generator_last.ckpt", state.gen, last, true);
    save_discriminator(dir / "discriminator_last.ckpt", state.disc, last, true);
    summary["disc_pretrain_f1"] = pre.empty() ? 0.0 : pre.back().validation.f1;
    summary["adv"] = {{"mle_bleu2", state.mle_bleu2}, {"best_round", state.best_round},
                      {"best_bleu2", state.best_bleu2}, {"rounds", rounds}};
    std::cout << "adv: " << cfg.train.adversarial_rounds << " rounds, validation BLEU2 "
              << state.mle_bleu2 << " (mle) -> " << state.best_bleu2 << " (round "
              << state.best_round << ")\n";
  }
  write_json(summary_path, summary);
  return 0;
}

// ---- generate ---------------------------------------------------------------

std::vector<std::vector<NoteToken>> read_melodies(const fs::path& path) {
  std::vector<std::vector<NoteToken>> out;
  if (path.extension() == ".jsonl") {
    for (const auto& line : load_corpus(path)) out.push_back(line.notes);
    return out;
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read melody file " + path.string());
  std::string text;
  for (std::size_t n = 1; std::getline(in, text); ++n) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_inline_melody(text));
    } catch (const CorpusError& e) {
      throw CorpusError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

struct GenerateArgs {
  fs::path checkpoint;
  std::string melody;
  fs::path melody_file;
  fs::path out;
  int theme = -1;
  std::uint64_t seed = 1;
  std::size_t count = 1;
  bool fit_melody = false;
};

int cmd_generate(const RunConfig& cfg, const GenerateArgs& a) {
  if (a.melody.empty() == a.melody_file.empty()) {
    throw std::invalid_argument("give exactly one of --melody and --melody-file");
  }
  const auto melodies = a.melody.empty()
                            ? read_melodies(a.melody_file)
                            : std::vector<std::vector<NoteToken>>{parse_inline_melody(a.melody)};
  const auto model = load_lyric_model(cfg.paths.data, a.checkpoint);
  const std::string hash = model.metadata.value("config_hash", std::string{});
  std::ostringstream text;
  for (std::size_t m = 0; m < melodies.size(); ++m) {
    GenerationRequest req;
    req.notes = melodies[m];
    req.theme = a.theme;
    req.seed = a.seed + m;
    req.count = a.count;
    req.fit_melody = a.fit_melody;
    const auto lines = generate_lyrics(model, req);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      text << nlohmann::json{{"melody", m},
                             {"sample", i},
                             {"notes", req.notes.size()},
                             {"syllables", lines[i].syllables},
                             {"aligned", lines[i].aligned},
                             {"theme", a.theme},
                             {"seed", req.seed},
                             {"model", model.name},
                             {"config_hash", hash}}
                  .dump()
           << "\n";
    }
  }
  if (a.out.empty()) {
    std::cout << text.str();
  } else {
    write_text(a.out, text.str());
  }
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

int cmd_evaluate(const RunConfig& cfg) {
  const auto data_dir = cfg.paths.data;
  if (!fs::exists(data_dir / "valid.jsonl")) {
    throw std::invalid_argument("missing validation split " + (data_dir / "valid.jsonl").string());
  }
  const auto corpus = load_prepared(data_dir);
  if (corpus.splits.valid.empty()) throw std::invalid_argument("validation split is empty");
  if (corpus.splits.test.empty()) throw std::invalid_argument("test split is empty");
  const auto themes = load_themes(data_dir);
  const auto stopwords = stopwords_for(cfg);

  std::vector<std::vector<int>> refs;
  for (const auto& row : encode_rows(corpus.splits.valid, corpus)) refs.push_back(content_ids(row.lyrics));
  const BleuReferencePool pool(cap_references(refs, cfg.train.reference_cap, cfg.seeds.eval), 4);
  const auto test = encode_rows(corpus.splits.test, corpus);
  const auto counts = note_counts(test);

  std::vector<ModelScores> scores;
  const auto bigram = BigramTable::fit(corpus.splits.train, corpus.vocab);
  const auto mc_bigram = McBigramTable::fit(corpus.splits.train, corpus.vocab);
  scores.push_back(score_lines("Bi-gram", bigram_lines(bigram, test.size(), corpus.max_len, cfg.seeds.eval),
                               pool, {}));
  McSampleStats stats;
  scores.push_back(score_lines("MC Bi-gram", mc_bigram_lines(mc_bigram, bigram, test, cfg.seeds.eval, &stats),
                               pool, counts));

  nlohmann::json report = {{"config_hash", cfg.hash()}, {"seeds", cfg.seed_record()},
                           {"test_lines", test.size()}, {"reference_lines", pool.size()},
                           {"mc_bigram_sampling", {{"conditioned", stats.conditioned},
                                                   {"backoffs", stats.backoffs},
                                                   {"unknowns", stats.unknowns}}}};
  std::optional<ThemeEvalReport> theme_report;
  for (const auto mode : {ConditioningMode::kNone, ConditioningMode::kMelody,
                          ConditioningMode::kMelodyTheme}) {
    const fs::path dir = cfg.paths.checkpoints / to_string(mode);
    if (uses_theme(mode) && !themes) continue;
    const auto data = make_training_set(mode, corpus, themes ? &*themes : nullptr);
    for (const auto& [file, label] : {std::pair{"generator_mle.ckpt", "MLE"},
                                      std::pair{"generator_adv.ckpt", "SeqGAN"}}) {
      const fs::path path = dir / file;
      if (!fs::exists(path)) continue;
      nlohmann::json meta;
      const auto gen = load_generator(path, &meta);
      if (meta.value("vocab_hash", std::uint64_t{0}) != corpus.vocab.hash()) {
        throw std::invalid_argument(path.string() + " was trained on other vocabularies");
      }
      const std::string name = std::string(label) + " " + to_string(mode);
      scores.push_back(score_lines(name, generate_lines(gen, data, test, cfg.seeds.eval), pool,
                                   uses_melody(mode) ? counts : std::vector<std::size_t>{}));
      if (uses_theme(mode)) {
        ThemeExperiment opts;
        opts.seed = cfg.seeds.eval;
        theme_report = theme_experiment(gen, data, test, *themes, corpus.vocab, stopwords, opts);
        report["theme_model"] = name;
      }
    }
  }
  report["models"] = nlohmann::json::array();
  for (const auto& s : scores) report["models"].push_back(to_json(s));
  std::string table = format_score_table(scores);
  if (theme_report) {
    report["theme"] = theme_report->to_json();
    write_text(cfg.paths.reports / "theme_confusion.csv", theme_report->confusion_csv());
    char buf[128];
    std::snprintf(buf, sizeof buf, "\nTheme classification (%s): macro F1 %.4f, micro F1 %.4f\n",
                  report["theme_model"].get<std::string>().c_str(), theme_report->macro_f1,
                  theme_report->micro_f1);
    table += buf;
  }
  write_json(cfg.paths.reports / "report.json", report);
  write_text(cfg.paths.reports / "report.txt", table);
  std::cout << table;
  return 0;
}

// ---- serve ------------------------------------------------------------------

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(const RunConfig& cfg, const fs::path& checkpoint) {
  auto model = std::make_shared<const LyricModel>(load_lyric_model(cfg.paths.data, checkpoint));
  LyricService service(model);
  HttpServer server(service);
  const int port = server.bind(cfg.host, cfg.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving " << model->name << " (" << to_string(model->generator.config().mode)
            << ") on http://" << cfg.host << ":" << port << std::endl;
  server.run();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Melody- and theme-conditioned lyrics generation"};
  app.require_subcommand(1);
  std::string config_path;
  std::string log_level = "info";
  app.add_option("--config", config_path, "JSON run config (env LYRICGAN_CONFIG if unset)");
  app.add_option("--log-level", log_level, "debug|info|warn|error|off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  // Flags that override config values; applied after the config is loaded.
  std::optional<std::string> corpus, vectors, stopwords, data, checkpoints, reports, mode;
  std::optional<std::uint64_t> split_seed, train_seed, eval_seed;
  std::optional<std::size_t> topics, iterations;
  std::optional<int> port;
  std::optional<std::string> host;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic corpus (and word vectors)");
  synth_cmd->add_option("--out", synth.out, "corpus JSONL")->required();
  synth_cmd->add_option("--songs", synth.songs);
  synth_cmd->add_option("--lines", synth.lines, "lines per song");
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--vectors", synth.vectors, "also write a word-vector table");
  synth_cmd->add_option("--dim", synth.dim, "word-vector dimension");
  synth_cmd->add_option("--stopwords", synth.stopwords, "also write the stop-word list");
  synth_cmd->add_option("--planted", synth.planted, "also write planted song themes");

  auto* prepare_cmd = app.add_subcommand("prepare", "Validate, build vocabularies, split");
  prepare_cmd->add_option("--corpus", corpus);
  prepare_cmd->add_option("--out", data, "prepared data directory");
  prepare_cmd->add_option("--seed", split_seed, "split seed");

  bool select = false;
  auto* lda_cmd = app.add_subcommand("lda", "Fit the theme model");
  lda_cmd->add_option("--data", data);
  lda_cmd->add_option("--vectors", vectors);
  lda_cmd->add_option("--stopwords", stopwords);
  lda_cmd->add_option("--topics", topics);
  lda_cmd->add_option("--iterations", iterations);
  lda_cmd->add_flag("--select", select, "also score topic counts 2..8 on held-out songs");

  std::string phase = "all";
  bool keep_rounds = false;
  auto* train_cmd = app.add_subcommand("train", "MLE pre-training and adversarial training");
  train_cmd->add_option("--data", data);
  train_cmd->add_option("--out", checkpoints, "checkpoint directory");
  train_cmd->add_option("--mode", mode)->check(CLI::IsMember({"none", "mc", "tmc"}));
  train_cmd->add_option("--phase", phase)->check(CLI::IsMember({"mle", "adv", "all"}));
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_flag("--keep-rounds", keep_rounds, "checkpoint every adversarial round");

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Generate lyrics for melodies");
  generate_cmd->add_option("--checkpoint", gen.checkpoint)->required();
  generate_cmd->add_option("--data", data);
  generate_cmd->add_option("--melody", gen.melody, "inline \"pitch:duration ...\"");
  generate_cmd->add_option("--melody-file", gen.melody_file,
                           "one inline melody per line, or a corpus .jsonl");
  generate_cmd->add_option("--theme", gen.theme, "theme id, -1 for none");
  generate_cmd->add_option("--seed", gen.seed);
  generate_cmd->add_option("--count", gen.count)->check(CLI::Range(1, 1000));
  generate_cmd->add_option("--out", gen.out, "JSONL output (stdout if unset)");
  generate_cmd->add_flag("--fit-melody", gen.fit_melody, "stop each line at the melody length");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score baselines and trained generators");
  evaluate_cmd->add_option("--data", data);
  evaluate_cmd->add_option("--checkpoints", checkpoints);
  evaluate_cmd->add_option("--out", reports, "report directory");
  evaluate_cmd->add_option("--seed", eval_seed);

  std::string serve_checkpoint;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service");
  serve_cmd->add_option("--checkpoint", serve_checkpoint)->required();
  serve_cmd->add_option("--data", data);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    log::set_level(log_level == "debug"  ? log::Level::kDebug
                   : log_level == "warn" ? log::Level::kWarn
                   : log_level == "error" ? log::Level::kError
                   : log_level == "off"  ? log::Level::kOff
                                         : log::Level::kInfo);
    if (config_path.empty()) {
      if (const char* env = std::getenv("LYRICGAN_CONFIG"); env != nullptr) config_path = env;
    }
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (corpus) cfg.paths.corpus = *corpus;
    if (vectors) cfg.paths.vectors = *vectors;
    if (stopwords) cfg.paths.stopwords = *stopwords;
    if (data) cfg.paths.data = *data;
    if (checkpoints) cfg.paths.checkpoints = *checkpoints;
    if (reports) cfg.paths.reports = *reports;
    if (mode) cfg.mode = parse_mode(*mode);
    if (split_seed) cfg.seeds.split = *split_seed;
    if (train_seed) cfg.train.seed = *train_seed;
    if (eval_seed) cfg.seeds.eval = *eval_seed;
    if (topics) cfg.lda.n_topics = *topics;
    if (iterations) cfg.lda.iterations = *iterations;
    if (host) cfg.host = *host;
    if (port) cfg.port = *port;
    if (!cfg.lda.labels.empty() && cfg.lda.labels.size() != cfg.lda.n_topics) {
      throw std::invalid_argument("lda.labels needs one label per topic");
    }

    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (prepare_cmd->parsed()) return cmd_prepare(cfg);
    if (lda_cmd->parsed()) return cmd_lda(cfg, select);
    if (train_cmd->parsed()) return cmd_train(cfg, parse_phase(phase), keep_rounds);
    if (generate_cmd->parsed()) return cmd_generate(cfg, gen);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg);
    if (serve_cmd->parsed()) return cmd_serve(cfg, serve_checkpoint);
  } catch (const TrainingAborted& e) {
    std::cerr << "error: training aborted: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
