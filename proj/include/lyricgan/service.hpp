#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lyricgan/corpus.hpp"
#include "lyricgan/lda.hpp"
#include "lyricgan/models.hpp"

namespace lyricgan {

/// Read-only inference bundle: a generator plus the vocabularies and theme
/// model it was trained against.
struct LyricModel {
  Generator generator;
  Vocab vocab;
  std::size_t max_len = 0;
  std::optional<ThemeModel> themes;
  std::string name;
  nlohmann::json metadata;
};

/// Loads `checkpoint` with vocab and max_len from a prepared data directory.
/// themes.json is loaded when present and required for a themed generator.
LyricModel load_lyric_model(const std::filesystem::path& data_dir,
                            const std::filesystem::path& checkpoint);

struct GenerationRequest {
  std::vector<NoteToken> notes;
  int theme = -1;  // -1: zero theme vector
  std::uint64_t seed = 0;
  std::size_t count = 1;
  /// Cap each line at the melody length instead of the model's max_len.
  bool fit_melody = false;
};

struct GeneratedLine {
  std::vector<std::string> syllables;
  bool aligned = false;  // one syllable per melody note
};

/// `count` lines for one melody. Unknown notes go through nearest_note.
/// Throws std::invalid_argument on an empty melody or a theme the model cannot take.
std::vector<GeneratedLine> generate_lyrics(const LyricModel& model, const GenerationRequest& request);

/// <START> ids <END> <PAD>... of length max(row_len, notes + 2).
std::vector<int> encode_melody(const std::vector<NoteToken>& notes, const Vocab& vocab,
                               std::size_t row_len);

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// Request handlers of the HTTP service, independent of the transport.
class LyricService {
 public:
  static constexpr std::size_t kMaxNotes = 64;
  static constexpr std::size_t kMaxCount = 32;

  explicit LyricService(std::shared_ptr<const LyricModel> model);

  ServiceResponse generate(std::string_view body) const;
  ServiceResponse themes() const;
  ServiceResponse health() const;

 private:
  std::shared_ptr<const LyricModel> model_;
};

/// Serves a LyricService over HTTP: POST /generate, GET /themes, GET /health.
class HttpServer {
 public:
  explicit HttpServer(const LyricService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  /// Returns once run() is accepting connections.
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lyricgan
