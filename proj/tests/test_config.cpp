#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "selfpro/config.hpp"
#include "selfpro/error.hpp"

using namespace selfpro;

namespace {

std::string config_error(const std::optional<std::filesystem::path>& file, std::vector<std::string> overrides) {
  try {
    parse_config(file, overrides);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig d = parse_config(std::nullopt, {});
  CHECK(d.pretrain.epochs == 200);
  CHECK(d.pretrain.lr == 5e-4);
  CHECK(d.pretrain.tau == 10.0);
  CHECK(d.prompt.sim == SimKind::cosine);
  CHECK(d.pretrain.n_negatives == 256);
  CHECK(d.pretrain.ema_momentum == 0.99);
  CHECK(d.pretrain.hidden == 256);
  CHECK(d.prompt.mu == 0.5);
  CHECK(d.prompt.tau_tune == d.pretrain.tau);
  CHECK(d.prompt.patience == 50);
  CHECK(d.harness.k == 1);
  CHECK(d.harness.n_val_per_class == 5);
  CHECK(d.harness.repeats == 10);
  CHECK(d.hash.size() == 64);
  CHECK(d.hash == default_config().hash);
  CHECK(d.pretrain.config_hash == d.hash);

  testutil::TempDir dir("cfg");
  std::ofstream(dir.path / "empty.ini") << "";
  CHECK(parse_config(dir.path / "empty.ini", {}).hash == d.hash);
  CHECK(config_keys().size() > 20);
}

TEST_CASE("overrides and files") {
  testutil::TempDir dir("cfg");
  SUBCASE("plain and qualified overrides") {
    const RunConfig a = parse_config(std::nullopt, std::vector<std::string>{"mu=0.3"});
    CHECK(a.prompt.mu == 0.3);
    CHECK(a.hash != default_config().hash);
    const RunConfig b = parse_config(std::nullopt, std::vector<std::string>{"prompt.mu=0.3"});
    CHECK(b.hash == a.hash);
  }
  SUBCASE("tau_tune follows tau unless set") {
    const RunConfig a = parse_config(std::nullopt, std::vector<std::string>{"tau=0.8"});
    CHECK(a.prompt.tau_tune == 0.8);
    const RunConfig b = parse_config(std::nullopt, std::vector<std::string>{"tau=0.8", "tau_tune=0.1"});
    CHECK(b.prompt.tau_tune == 0.1);
  }
  SUBCASE("link pretraining schedule") {
    const RunConfig d = default_config();
    REQUIRE(d.harness.link_pretrain);
    const RunConfig a = parse_config(std::nullopt, std::vector<std::string>{"lp_epochs=50", "seed=4"});
    REQUIRE(a.harness.link_pretrain);
    CHECK(a.harness.link_pretrain->epochs == 50);
    CHECK(a.harness.link_pretrain->seed == 4);
    CHECK(a.harness.link_pretrain->tau == a.pretrain.tau);
    const RunConfig b = parse_config(std::nullopt, std::vector<std::string>{"lp_repretrain=false"});
    CHECK(!b.harness.link_pretrain);
    config_error(std::nullopt, {"lp_epochs=-1"});
  }
  SUBCASE("file then override") {
    std::ofstream(dir.path / "c.ini") << "[prompt]\nmu = 0.2\nmode = semantic\n[run]\nseed = 9\n";
    const RunConfig c = parse_config(dir.path / "c.ini", std::vector<std::string>{"mu=0.7"});
    CHECK(c.prompt.mu == 0.7);
    CHECK(c.prompt.mode == PromptMode::semantic);
    CHECK(c.seed == 9);
    CHECK(c.pretrain.seed == 9);
    CHECK(c.harness.seed == 9);
  }
  SUBCASE("hash ignores key order") {
    std::ofstream(dir.path / "a.ini") << "[prompt]\nmu = 0.2\ntune_lr = 0.01\n[pretrain]\nepochs = 10\n";
    std::ofstream(dir.path / "b.ini") << "[pretrain]\nepochs = 10\n[prompt]\ntune_lr = 0.01\nmu = 0.2\n";
    CHECK(parse_config(dir.path / "a.ini", {}).hash == parse_config(dir.path / "b.ini", {}).hash);
  }
  SUBCASE("dump round trip") {
    const RunConfig c =
        parse_config(std::nullopt, std::vector<std::string>{"epochs=17", "injection=self_weight", "seed=3"});
    write_config(c, dir.path / "out.ini");
    const RunConfig back = parse_config(dir.path / "out.ini", {});
    CHECK(back.hash == c.hash);
    CHECK(canonical_dump(back) == canonical_dump(c));
  }
}

TEST_CASE("config errors") {
  testutil::TempDir dir("cfg");
  const std::string unknown = config_error(std::nullopt, {"muu=0.3"});
  CHECK(unknown.find("'mu'") != std::string::npos);
  CHECK(unknown.find("tune_lr") != std::string::npos);

  CHECK(config_error(std::nullopt, {"mu=abc"}).find("mu") != std::string::npos);
  config_error(std::nullopt, {"epochs=1.5"});
  config_error(std::nullopt, {"mode=both"});
  config_error(std::nullopt, {"mu=1.5"});
  config_error(std::nullopt, {"noequals"});
  config_error(std::nullopt, {"harness.mu=0.1"});

  std::ofstream(dir.path / "wrong.ini") << "[pretrain]\nmu = 0.2\n";
  CHECK(config_error(dir.path / "wrong.ini", {}).find("[prompt]") != std::string::npos);
  std::ofstream(dir.path / "sect.ini") << "[bogus]\nx = 1\n";
  config_error(dir.path / "sect.ini", {});

  try {
    parse_config(dir.path / "nope.ini", {});
    FAIL("expected a load error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::load);
  }
}

TEST_CASE("edit distance") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("mu", "muu") == 1);
  CHECK(edit_distance("abc", "") == 3);
}
