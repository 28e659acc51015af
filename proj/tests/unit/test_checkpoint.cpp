#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "lyricgan/checkpoint.hpp"

using namespace lyricgan;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("lyricgan_ckpt_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

GeneratorConfig config(ConditioningMode mode) {
  GeneratorConfig c;
  c.mode = mode;
  c.lyric_vocab = 11;
  c.melody_vocab = 8;
  c.embedding_dim = 4;
  c.hidden_dim = 3;
  c.theme_dim = uses_theme(mode) ? 2 : 0;
  return c;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_all(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

bool same_values(const std::vector<const nn::Parameter*>& a, const std::vector<const nn::Parameter*>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->name != b[i]->name || !(a[i]->value == b[i]->value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("generator round trip for every mode") {
  TempDir dir;
  for (auto mode : {ConditioningMode::kNone, ConditioningMode::kMelody, ConditioningMode::kMelodyTheme}) {
    const Generator g(config(mode), 3);
    const auto path = dir / (to_string(mode) + ".ckpt");
    save_generator(path, g, {{"vocab_hash", "abc"}});
    nlohmann::json meta;
    const Generator back = load_generator(path, &meta);
    CHECK(meta.at("vocab_hash") == "abc");
    CHECK(back.config().to_json() == g.config().to_json());
    CHECK(same_values(back.parameters(), g.parameters()));
    // Re-saving is byte-identical.
    save_generator(dir / "again.ckpt", back, {{"vocab_hash", "abc"}});
    CHECK(read_all(path) == read_all(dir / "again.ckpt"));
    CHECK(read_all(path).starts_with("LYRICGAN-CKPT 1\n"));
  }
}

TEST_CASE("optimizer slots survive the round trip") {
  TempDir dir;
  Generator g(config(ConditioningMode::kMelody), 4);
  double x = 0.5;
  for (auto* p : g.parameters()) {
    for (double& v : p->first_moment.values()) v = (x += 0.25);
    for (double& v : p->second_moment.values()) v = (x *= 0.5) + 1.0;
  }
  save_generator(dir / "slots.ckpt", g, {}, true);
  CHECK(read_checkpoint_header(dir / "slots.ckpt").optimizer_slots);
  const Generator back = load_generator(dir / "slots.ckpt");
  const auto a = g.parameters();
  const auto b = back.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->first_moment == b[i]->first_moment);
    CHECK(a[i]->second_moment == b[i]->second_moment);
  }
}

TEST_CASE("discriminator round trip and kind check") {
  TempDir dir;
  DiscriminatorConfig c;
  c.vocab = 11;
  c.embedding_dim = 3;
  c.feature_maps = 2;
  c.hidden_dim = 4;
  const Discriminator d(c, 5);
  save_discriminator(dir / "d.ckpt", d, {});
  const Discriminator back = load_discriminator(dir / "d.ckpt");
  CHECK(same_values(back.parameters(), d.parameters()));
  CHECK_THROWS_WITH(load_generator(dir / "d.ckpt"), doctest::Contains("not a generator"));
  save_generator(dir / "g.ckpt", Generator(config(ConditioningMode::kNone), 1), {});
  CHECK_THROWS_WITH(load_discriminator(dir / "g.ckpt"), doctest::Contains("not a discriminator"));
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir;
  const Generator g(config(ConditioningMode::kMelody), 6);
  const auto path = dir / "g.ckpt";
  save_generator(path, g, {});
  const std::string bytes = read_all(path);

  write_all(dir / "trailing.ckpt", bytes + "x");
  CHECK_THROWS_WITH(load_generator(dir / "trailing.ckpt"), doctest::Contains("trailing bytes"));

  write_all(dir / "short.ckpt", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_WITH(load_generator(dir / "short.ckpt"), doctest::Contains("truncated"));

  write_all(dir / "magic.ckpt", "LYRICGAN-CKPT 2" + bytes.substr(15));
  CHECK_THROWS(load_generator(dir / "magic.ckpt"));

  CHECK_THROWS_WITH(load_generator(dir / "absent.ckpt"), doctest::Contains("cannot open"));

  // Parameters that do not match the stored shapes.
  Generator other(config(ConditioningMode::kNone), 1);
  CHECK_THROWS_WITH(read_checkpoint(path, other.parameters()), doctest::Contains("checkpoint"));
  auto cfg = config(ConditioningMode::kMelody);
  cfg.hidden_dim = 4;
  Generator wider(cfg, 1);
  CHECK_THROWS_WITH(read_checkpoint(path, wider.parameters()), doctest::Contains("checkpoint parameter"));
}
