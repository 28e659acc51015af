#include "lyricgan/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lyricgan {

namespace {

constexpr const char* kMagic = "LYRICGAN-CKPT";

void write_doubles(std::ostream& out, const nn::Tensor& t) {
  for (double v : t.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
}

void read_doubles(std::istream& in, nn::Tensor& t, const std::string& name) {
  for (double& v : t.values()) {
    char bytes[8];
    if (!in.read(bytes, 8)) throw std::runtime_error("checkpoint truncated in " + name);
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
}

nlohmann::json read_header_json(std::istream& in, const std::filesystem::path& path) {
  std::string magic_line;
  std::getline(in, magic_line);
  const std::string expected = std::string(kMagic) + " " + std::to_string(kCheckpointVersion);
  if (magic_line != expected) {
    throw std::runtime_error(path.string() + " is not a version " +
                             std::to_string(kCheckpointVersion) + " checkpoint");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("checkpoint header missing");
  return nlohmann::json::parse(header_line);
}

CheckpointHeader to_header(const nlohmann::json& j) {
  CheckpointHeader h;
  h.kind = j.at("kind").get<std::string>();
  h.config = j.at("config");
  h.metadata = j.value("metadata", nlohmann::json::object());
  h.optimizer_slots = j.at("optimizer_slots").get<bool>();
  return h;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                      const std::vector<const nn::Parameter*>& params) {
  nlohmann::json j;
  j["kind"] = header.kind;
  j["config"] = header.config;
  j["metadata"] = header.metadata;
  j["optimizer_slots"] = header.optimizer_slots;
  j["format_version"] = kCheckpointVersion;
  nlohmann::json layout = nlohmann::json::array();
  for (const auto* p : params) layout.push_back({{"name", p->name}, {"shape", p->shape()}});
  j["parameters"] = std::move(layout);

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << kMagic << ' ' << kCheckpointVersion << '\n' << j.dump() << '\n';
    for (const auto* p : params) {
      write_doubles(out, p->value);
      if (header.optimizer_slots) {
        write_doubles(out, p->first_moment);
        write_doubles(out, p->second_moment);
      }
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return to_header(read_header_json(in, path));
}

CheckpointHeader read_checkpoint(const std::filesystem::path& path,
                                 const std::vector<nn::Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto j = read_header_json(in, path);
  const auto header = to_header(j);
  const auto& layout = j.at("parameters");
  if (layout.size() != params.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(layout.size()) +
                             " parameters, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = layout[i].at("name").get<std::string>();
    const auto shape = layout[i].at("shape").get<std::vector<std::size_t>>();
    if (name != params[i]->name || shape != params[i]->shape()) {
      throw std::runtime_error("checkpoint parameter " + std::to_string(i) + " (" + name +
                               ") does not match model parameter " + params[i]->name);
    }
  }
  for (auto* p : params) {
    read_doubles(in, p->value, p->name);
    if (header.optimizer_slots) {
      read_doubles(in, p->first_moment, p->name);
      read_doubles(in, p->second_moment, p->name);
    } else {
      p->reset_slots();
    }
    p->zero_grad();
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint has trailing bytes: " + path.string());
  }
  return header;
}

void save_generator(const std::filesystem::path& path, const Generator& gen,
                    const nlohmann::json& metadata, bool optimizer_slots) {
  write_checkpoint(path, {"generator", gen.config().to_json(), metadata, optimizer_slots},
                   gen.parameters());
}

Generator load_generator(const std::filesystem::path& path, nlohmann::json* metadata) {
  const auto header = read_checkpoint_header(path);
  if (header.kind != "generator") {
    throw std::runtime_error(path.string() + " holds a " + header.kind + ", not a generator");
  }
  Generator gen(GeneratorConfig::from_json(header.config), 0);
  const auto full = read_checkpoint(path, gen.parameters());
  if (metadata != nullptr) *metadata = full.metadata;
  return gen;
}

void save_discriminator(const std::filesystem::path& path, const Discriminator& disc,
                        const nlohmann::json& metadata, bool optimizer_slots) {
  write_checkpoint(path, {"discriminator", disc.config().to_json(), metadata, optimizer_slots},
                   disc.parameters());
}

Discriminator load_discriminator(const std::filesystem::path& path, nlohmann::json* metadata) {
  const auto header = read_checkpoint_header(path);
  if (header.kind != "discriminator") {
    throw std::runtime_error(path.string() + " holds a " + header.kind + ", not a discriminator");
  }
  Discriminator disc(DiscriminatorConfig::from_json(header.config), 0);
  const auto full = read_checkpoint(path, disc.parameters());
  if (metadata != nullptr) *metadata = full.metadata;
  return disc;
}

}  // namespace lyricgan
