#include "lyricgan/service.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "httplib.h"
#include "lyricgan/checkpoint.hpp"
#include "lyricgan/log.hpp"

namespace lyricgan {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + path.string());
  return nlohmann::json::parse(in);
}

// Field-level rejection of a request.
struct BadField {
  std::string field;
  std::string message;
};

ServiceResponse bad_request(const BadField& bad) {
  return {400, {{"error", bad.message}, {"field", bad.field}}};
}

std::string opaque_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = std::random_device{}();
  const std::uint64_t n = counter.fetch_add(1) + 1;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(std::to_string(salt) + ":" + std::to_string(n))));
  return buf;
}

int integer_field(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_integer()) throw BadField{field, "must be an integer"};
  return j.get<int>();
}

GenerationRequest parse_request(std::string_view body, const LyricModel& model) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw BadField{"body", "not valid JSON"};
  }
  if (!j.is_object()) throw BadField{"body", "must be a JSON object"};

  GenerationRequest req;
  req.fit_melody = true;
  if (!j.contains("notes")) throw BadField{"notes", "required"};
  const auto& notes = j["notes"];
  if (!notes.is_array() || notes.empty()) throw BadField{"notes", "must be a non-empty array"};
  if (notes.size() > LyricService::kMaxNotes) {
    throw BadField{"notes", "at most " + std::to_string(LyricService::kMaxNotes) + " notes"};
  }
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const std::string field = "notes[" + std::to_string(i) + "]";
    const auto& n = notes[i];
    if (!n.is_array() || n.size() != 2) throw BadField{field, "must be [pitch, duration]"};
    NoteToken note{integer_field(n[0], field + "[0]"), integer_field(n[1], field + "[1]")};
    if (note.pitch < kMinPitch || note.pitch > kMaxPitch) {
      throw BadField{field + "[0]", "pitch outside [21, 108]"};
    }
    if (note.duration < kMinDuration || note.duration > kMaxDuration) {
      throw BadField{field + "[1]", "duration outside [1, 128]"};
    }
    req.notes.push_back(note);
  }

  if (j.contains("theme") && !j["theme"].is_null()) {
    req.theme = integer_field(j["theme"], "theme");
    if (req.theme != -1) {
      if (!uses_theme(model.generator.config().mode)) {
        throw BadField{"theme", "served model is not theme-conditioned"};
      }
      const auto n_themes = static_cast<int>(model.themes->n_topics);
      if (req.theme < 0 || req.theme >= n_themes) {
        throw BadField{"theme", "must be -1 or in [0, " + std::to_string(n_themes) + ")"};
      }
    }
  }

  if (j.contains("seed") && !j["seed"].is_null()) {
    if (!j["seed"].is_number_unsigned()) throw BadField{"seed", "must be a non-negative integer"};
    req.seed = j["seed"].get<std::uint64_t>();
  } else {
    std::random_device rd;
    req.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }

  if (j.contains("count") && !j["count"].is_null()) {
    const int count = integer_field(j["count"], "count");
    if (count < 1 || count > static_cast<int>(LyricService::kMaxCount)) {
      throw BadField{"count", "must be in [1, " + std::to_string(LyricService::kMaxCount) + "]"};
    }
    req.count = static_cast<std::size_t>(count);
  }
  return req;
}

}  // namespace

LyricModel load_lyric_model(const std::filesystem::path& data_dir,
                            const std::filesystem::path& checkpoint) {
  LyricModel model;
  model.generator = load_generator(checkpoint, &model.metadata);
  model.vocab = Vocab::from_json(read_json_file(data_dir / "vocab.json"));
  model.max_len = read_json_file(data_dir / "prepare.json").at("max_len").get<std::size_t>();
  model.name = checkpoint.filename().string();
  const auto& cfg = model.generator.config();
  if (cfg.lyric_vocab != model.vocab.syllable_count() ||
      cfg.melody_vocab != model.vocab.note_count()) {
    throw std::runtime_error("checkpoint " + checkpoint.string() +
                             " does not match the vocabularies in " + data_dir.string());
  }
  if (model.metadata.contains("vocab_hash") &&
      model.metadata["vocab_hash"].get<std::uint64_t>() != model.vocab.hash()) {
    throw std::runtime_error("checkpoint vocab hash differs from " + data_dir.string());
  }
  const auto theme_path = data_dir / "themes.json";
  if (std::filesystem::exists(theme_path)) model.themes = ThemeModel::load(theme_path);
  if (uses_theme(cfg.mode) && !model.themes) {
    throw std::runtime_error("themed checkpoint needs " + theme_path.string() + "; run lda first");
  }
  return model;
}

std::vector<int> encode_melody(const std::vector<NoteToken>& notes, const Vocab& vocab,
                               std::size_t row_len) {
  std::vector<int> row(std::max(row_len, notes.size() + 2), kPad);
  row[0] = kStart;
  for (std::size_t i = 0; i < notes.size(); ++i) row[i + 1] = nearest_note(notes[i], vocab);
  row[notes.size() + 1] = kEnd;
  return row;
}

std::vector<GeneratedLine> generate_lyrics(const LyricModel& model,
                                           const GenerationRequest& request) {
  if (request.notes.empty()) throw std::invalid_argument("melody has no notes");
  const auto mode = model.generator.config().mode;
  GenerationContext ctx;
  const std::size_t row_len = request.fit_melody ? request.notes.size() + 2 : model.max_len;
  ctx.melody = encode_melody(request.notes, model.vocab, row_len);
  const std::size_t len = ctx.melody.size();
  if (!uses_melody(mode)) ctx.melody.clear();
  if (request.theme != -1) {
    if (!uses_theme(mode)) throw std::invalid_argument("model is not theme-conditioned");
    if (!model.themes || request.theme < 0 ||
        static_cast<std::size_t>(request.theme) >= model.themes->embeddings.size()) {
      throw std::invalid_argument("unknown theme " + std::to_string(request.theme));
    }
    ctx.theme = model.themes->embeddings[static_cast<std::size_t>(request.theme)];
  }
  std::mt19937_64 rng(request.seed);
  const std::vector<GenerationContext> contexts(request.count, ctx);
  std::vector<GeneratedLine> out;
  for (const auto& row : model.generator.sample(contexts, len, rng)) {
    GeneratedLine line;
    line.syllables = decode_lyrics(row, model.vocab);
    line.aligned = line.syllables.size() == request.notes.size();
    out.push_back(std::move(line));
  }
  return out;
}

LyricService::LyricService(std::shared_ptr<const LyricModel> model) : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("service needs a model");
}

ServiceResponse LyricService::generate(std::string_view body) const {
  GenerationRequest req;
  try {
    req = parse_request(body, *model_);
  } catch (const BadField& bad) {
    return bad_request(bad);
  }
  try {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& line : generate_lyrics(*model_, req)) {
      lines.push_back({{"syllables", line.syllables}, {"aligned", line.aligned}});
    }
    return {200, {{"lines", lines}, {"model", model_->name}, {"seed", req.seed}}};
  } catch (const std::exception& e) {
    const auto id = opaque_id();
    log::error("generation failed [" + id + "]: " + e.what());
    return {500, {{"error", "generation failed"}, {"id", id}}};
  }
}

ServiceResponse LyricService::themes() const {
  nlohmann::json list = nlohmann::json::array();
  if (model_->themes && uses_theme(model_->generator.config().mode)) {
    const auto& t = *model_->themes;
    for (std::size_t k = 0; k < t.n_topics; ++k) {
      list.push_back({{"id", k},
                      {"label", k < t.labels.size() ? t.labels[k] : ""},
                      {"top_words", t.top_words.at(k)}});
    }
  }
  return {200, {{"themes", list}}};
}

ServiceResponse LyricService::health() const {
  return {200,
          {{"status", "ok"},
           {"checkpoint", model_->name},
           {"vocab_sizes",
            {{"syllables", model_->vocab.syllable_count()}, {"notes", model_->vocab.note_count()}}}}};
}

struct HttpServer::Impl {
  explicit Impl(const LyricService& s) : service(s) {}
  const LyricService& service;
  httplib::Server server;
};

HttpServer::HttpServer(const LyricService& service)
    : impl_(std::make_unique<Impl>(service)) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto& svc = impl_->service;
  impl_->server.Post("/generate", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.generate(req.body));
  });
  impl_->server.Get("/themes", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.themes());
  });
  impl_->server.Get("/health", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.health());
  });
  impl_->server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        const auto id = opaque_id();
        try {
          if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          log::error("request failed [" + id + "]: " + e.what());
        } catch (...) {
          log::error("request failed [" + id + "]");
        }
        res.status = 500;
        res.set_content(nlohmann::json{{"error", "internal error"}, {"id", id}}.dump(),
                        "application/json");
      });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace lyricgan
