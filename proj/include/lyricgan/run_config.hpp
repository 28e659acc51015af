#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lyricgan/lda.hpp"
#include "lyricgan/models.hpp"
#include "lyricgan/training.hpp"

namespace lyricgan {

/// Settings shared by every CLI command. Missing keys in a config file keep
/// their defaults; unknown keys are rejected.
struct RunConfig {
  struct Paths {
    std::filesystem::path corpus;
    std::filesystem::path vectors;
    std::filesystem::path stopwords;  // empty: built-in synthetic stop-words
    std::filesystem::path data = "data";
    std::filesystem::path checkpoints = "checkpoints";
    std::filesystem::path reports = "reports";
  };
  struct Seeds {
    std::uint64_t split = 1;
    std::uint64_t init = 1;  // generator init; the discriminator uses init + 1
    std::uint64_t eval = 1;
  };
  struct Lda {
    std::size_t n_topics = 5;
    double alpha = -1.0;
    double beta = 0.01;
    std::size_t iterations = 1000;
    std::uint64_t seed = 1;
    std::size_t top_k = 10;
    std::vector<std::string> labels;  // free text, one per topic
  };

  Paths paths;
  ConditioningMode mode = ConditioningMode::kMelody;
  std::size_t length_cap = 32;
  std::size_t embedding_dim = 128;
  std::size_t hidden_dim = 128;
  DiscriminatorConfig discriminator;  // vocab filled in at training time
  TrainConfig train;
  Lda lda;
  Seeds seeds;
  std::string host = "127.0.0.1";
  int port = 8080;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  /// Hex FNV-1a of everything except paths and service settings, so the same
  /// run in another directory hashes the same.
  std::string hash() const;
  /// All seeds as one object, for embedding in artifacts.
  nlohmann::json seed_record() const;
  LdaOptions lda_options() const;
};

}  // namespace lyricgan
