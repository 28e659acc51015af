#include "doctest.h"
#include "lyricgan/run_config.hpp"

using namespace lyricgan;
using nlohmann::json;

TEST_CASE("run config round trip keeps every field") {
  RunConfig c;
  c.mode = ConditioningMode::kMelodyTheme;
  c.embedding_dim = 64;
  c.train.mle_epochs = 40;
  c.train.pg_learning_rate = 1e-4;
  c.lda.labels = {"a", "b", "c", "d", "e"};
  c.seeds.init = 9;
  c.paths.data = "elsewhere";
  const auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
}

TEST_CASE("missing keys keep defaults and unknown keys are rejected") {
  const auto c = RunConfig::from_json(json{{"train", {{"mle_epochs", 3}}}});
  CHECK(c.train.mle_epochs == 3);
  CHECK(c.train.disc_epochs == RunConfig{}.train.disc_epochs);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"trian", json::object()}}), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"train", {{"epochs", 3}}}}), std::invalid_argument);
  CHECK_THROWS(RunConfig::from_json(json{{"mode", "lyrics"}}));
  CHECK_THROWS(RunConfig::from_json(json{{"train", {{"batch_size", 0}}}}));
}

TEST_CASE("hash ignores paths and service settings only") {
  RunConfig a, b;
  b.paths.data = "/somewhere/else";
  b.paths.checkpoints = "ck";
  b.host = "0.0.0.0";
  b.port = 9000;
  CHECK(a.hash() == b.hash());
  b.train.rollouts = 3;
  CHECK(a.hash() != b.hash());
  RunConfig d;
  d.seeds.split = 2;
  CHECK(a.hash() != d.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("lda options follow the config") {
  RunConfig c;
  c.lda.n_topics = 7;
  c.lda.iterations = 12;
  const auto o = c.lda_options();
  CHECK(o.n_topics == 7);
  CHECK(o.iterations == 12);
  CHECK(c.seed_record().contains("lda"));
}

TEST_CASE("nested optimizer sections reject unknown keys") {
  CHECK_NOTHROW(RunConfig::from_json(json{{"train", {{"adam", {{"learning_rate", 0.01}}}}}}));
  CHECK_THROWS_AS(RunConfig::from_json(json{{"train", {{"adam", {{"lr", 0.01}}}}}}), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"train", {{"adagrad", {{"momentum", 0.9}}}}}}),
                  std::invalid_argument);
}
