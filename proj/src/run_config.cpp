#include "lyricgan/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "lyricgan/corpus.hpp"

namespace lyricgan {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown config key " + where + "." + key);
  }
}

std::set<std::string> keys_of(const nlohmann::json& j) {
  std::set<std::string> out;
  for (const auto& [key, _] : j.items()) out.insert(key);
  return out;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"paths",
           {{"corpus", paths.corpus.generic_string()},
            {"vectors", paths.vectors.generic_string()},
            {"stopwords", paths.stopwords.generic_string()},
            {"data", paths.data.generic_string()},
            {"checkpoints", paths.checkpoints.generic_string()},
            {"reports", paths.reports.generic_string()}}},
          {"mode", to_string(mode)},
          {"length_cap", length_cap},
          {"generator", {{"embedding_dim", embedding_dim}, {"hidden_dim", hidden_dim}}},
          {"discriminator",
           {{"embedding_dim", discriminator.embedding_dim},
            {"filter_widths", discriminator.filter_widths},
            {"feature_maps", discriminator.feature_maps},
            {"hidden_dim", discriminator.hidden_dim},
            {"dropout", discriminator.dropout}}},
          {"train", train.to_json()},
          {"lda",
           {{"n_topics", lda.n_topics},
            {"alpha", lda.alpha},
            {"beta", lda.beta},
            {"iterations", lda.iterations},
            {"seed", lda.seed},
            {"top_k", lda.top_k},
            {"labels", lda.labels}}},
          {"seeds", {{"split", seeds.split}, {"init", seeds.init}, {"eval", seeds.eval}}},
          {"service", {{"host", host}, {"port", port}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"paths", "mode", "length_cap", "generator", "discriminator", "train", "lda",
                  "seeds", "service"},
                 "config");
  RunConfig c;
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    reject_unknown(p, {"corpus", "vectors", "stopwords", "data", "checkpoints", "reports"}, "paths");
    c.paths.corpus = p.value("corpus", c.paths.corpus.string());
    c.paths.vectors = p.value("vectors", c.paths.vectors.string());
    c.paths.stopwords = p.value("stopwords", c.paths.stopwords.string());
    c.paths.data = p.value("data", c.paths.data.string());
    c.paths.checkpoints = p.value("checkpoints", c.paths.checkpoints.string());
    c.paths.reports = p.value("reports", c.paths.reports.string());
  }
  if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
  c.length_cap = j.value("length_cap", c.length_cap);
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    reject_unknown(g, {"embedding_dim", "hidden_dim"}, "generator");
    c.embedding_dim = g.value("embedding_dim", c.embedding_dim);
    c.hidden_dim = g.value("hidden_dim", c.hidden_dim);
  }
  if (j.contains("discriminator")) {
    const auto& d = j["discriminator"];
    reject_unknown(d, {"embedding_dim", "filter_widths", "feature_maps", "hidden_dim", "dropout"},
                   "discriminator");
    c.discriminator.embedding_dim = d.value("embedding_dim", c.discriminator.embedding_dim);
    c.discriminator.filter_widths = d.value("filter_widths", c.discriminator.filter_widths);
    c.discriminator.feature_maps = d.value("feature_maps", c.discriminator.feature_maps);
    c.discriminator.hidden_dim = d.value("hidden_dim", c.discriminator.hidden_dim);
    c.discriminator.dropout = d.value("dropout", c.discriminator.dropout);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    const auto defaults = TrainConfig{}.to_json();
    reject_unknown(t, keys_of(defaults), "train");
    for (const char* section : {"adam", "adagrad"}) {
      if (t.contains(section)) {
        reject_unknown(t[section], keys_of(defaults[section]), std::string("train.") + section);
      }
    }
    c.train = TrainConfig::from_json(t);
  }
  if (j.contains("lda")) {
    const auto& l = j["lda"];
    reject_unknown(l, {"n_topics", "alpha", "beta", "iterations", "seed", "top_k", "labels"}, "lda");
    c.lda.n_topics = l.value("n_topics", c.lda.n_topics);
    c.lda.alpha = l.value("alpha", c.lda.alpha);
    c.lda.beta = l.value("beta", c.lda.beta);
    c.lda.iterations = l.value("iterations", c.lda.iterations);
    c.lda.seed = l.value("seed", c.lda.seed);
    c.lda.top_k = l.value("top_k", c.lda.top_k);
    c.lda.labels = l.value("labels", c.lda.labels);
  }
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    reject_unknown(s, {"split", "init", "eval"}, "seeds");
    c.seeds.split = s.value("split", c.seeds.split);
    c.seeds.init = s.value("init", c.seeds.init);
    c.seeds.eval = s.value("eval", c.seeds.eval);
  }
  if (j.contains("service")) {
    const auto& s = j["service"];
    reject_unknown(s, {"host", "port"}, "service");
    c.host = s.value("host", c.host);
    c.port = s.value("port", c.port);
  }
  if (c.embedding_dim == 0 || c.hidden_dim == 0) {
    throw std::invalid_argument("generator dimensions must be positive");
  }
  if (c.lda.n_topics == 0) throw std::invalid_argument("lda.n_topics must be positive");
  if (!c.lda.labels.empty() && c.lda.labels.size() != c.lda.n_topics) {
    throw std::invalid_argument("lda.labels needs one label per topic");
  }
  if (c.port < 0 || c.port > 65535) throw std::invalid_argument("service.port out of range");
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string RunConfig::hash() const {
  auto j = to_json();
  j.erase("paths");
  j.erase("service");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

nlohmann::json RunConfig::seed_record() const {
  return {{"split", seeds.split},
          {"init", seeds.init},
          {"eval", seeds.eval},
          {"train", train.seed},
          {"lda", lda.seed}};
}

LdaOptions RunConfig::lda_options() const {
  LdaOptions o;
  o.n_topics = lda.n_topics;
  o.alpha = lda.alpha;
  o.beta = lda.beta;
  o.iterations = lda.iterations;
  o.seed = lda.seed;
  o.top_k = lda.top_k;
  return o;
}

}  // namespace lyricgan
