#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lyricgan/models.hpp"
#include "lyricgan/nn/tensor.hpp"

// Checkpoint layout (version 1):
//
//   LYRICGAN-CKPT 1\n
//   <header: one line of JSON>\n
//   <parameter block>
//
// The header carries "kind", "config", "parameters" (name and shape, in
// parameter order), "optimizer_slots" and any caller metadata (vocab hash,
// seeds, training phase). The block holds, for each parameter in order, its
// values followed, when optimizer_slots is true, by the first and second
// moment accumulators, all as little-endian IEEE-754 doubles.

namespace lyricgan {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointHeader {
  std::string kind;  // "generator" or "discriminator"
  nlohmann::json config;
  nlohmann::json metadata = nlohmann::json::object();
  bool optimizer_slots = false;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                      const std::vector<const nn::Parameter*>& params);

/// Reads the header only.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Fills params (which must match names and shapes in order) and returns the header.
CheckpointHeader read_checkpoint(const std::filesystem::path& path,
                                 const std::vector<nn::Parameter*>& params);

void save_generator(const std::filesystem::path& path, const Generator& gen,
                    const nlohmann::json& metadata, bool optimizer_slots = false);
Generator load_generator(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

void save_discriminator(const std::filesystem::path& path, const Discriminator& disc,
                        const nlohmann::json& metadata, bool optimizer_slots = false);
Discriminator load_discriminator(const std::filesystem::path& path,
                                 nlohmann::json* metadata = nullptr);

}  // namespace lyricgan
