#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "helpers.hpp"

using namespace t2t;
using namespace t2t::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config precedence is defaults, then file, then flags") {
  const auto dir = t2t::test::scratch_dir("cli_config");
  std::ofstream(dir / "c.json") << R"({"beam": 3, "hidden": 16, "seed": 4})";
  RunOptions o;
  o.config_path = (dir / "c.json").string();
  o.hidden = 12;
  const TrainConfig c = resolve_config(o);
  CHECK(c.beam == 3);
  CHECK(c.hidden == 12);
  CHECK(c.seed == 4);
  CHECK(c.window == TrainConfig{}.window);
}

TEST_CASE("summaries json round-trip") {
  const std::vector<Summary> s{{"g1", {"a", "b"}, -1.5}, {"g2", {}, 0.0}};
  const auto back = summaries_from_json(summaries_to_json(s));
  REQUIRE(back.size() == 2);
  CHECK(back[0].game_id == "g1");
  CHECK(back[0].tokens == s[0].tokens);
  CHECK(back[0].log_prob == -1.5);
  CHECK(back[1].tokens.empty());
}

TEST_CASE("bad paths map to their exit codes") {
  RunOptions o;
  o.data = "/nonexistent/t2t";
  CHECK(cmd_template(o) == kBadDataPath);
  CHECK(cmd_train(o) == kBadDataPath);

  const auto dir = t2t::test::scratch_dir("cli_bad_ckpt");
  RunOptions toy;
  toy.out = (dir / "data").string();
  toy.games = 4;
  toy.players = 1;
  toy.test_games = 1;
  REQUIRE(cmd_gen_toy(toy) == kOk);
  std::ofstream(dir / "broken.json") << "{\"format\": \"t2t-checkpoint\"";
  RunOptions g;
  g.data = toy.out;
  g.checkpoint = (dir / "broken.json").string();
  CHECK(cmd_generate(g) == kBadCheckpoint);
  g.checkpoint = (dir / "missing.json").string();
  CHECK(cmd_generate(g) == kBadCheckpoint);
}

TEST_CASE("gen-toy, template and evaluate end to end") {
  const auto dir = t2t::test::scratch_dir("cli_template");
  RunOptions toy;
  toy.out = (dir / "data").string();
  toy.games = 8;
  toy.players = 2;
  toy.test_games = 2;
  REQUIRE(cmd_gen_toy(toy) == kOk);
  CHECK(fs::exists(dir / "data" / "test.json"));

  RunOptions t;
  t.data = toy.out;
  t.out = (dir / "template.json").string();
  REQUIRE(cmd_template(t) == kOk);
  CHECK(summaries_from_json(slurp(t.out)).size() == 2);

  RunOptions e;
  e.data = toy.out;
  e.generated = t.out;
  e.out = (dir / "report.json").string();
  REQUIRE(cmd_evaluate(e) == kOk);
  const auto report = nlohmann::json::parse(slurp(e.out));
  CHECK(report["RG-P%"].get<double>() == 100.0);
}

TEST_CASE("train then generate") {
  const auto dir = t2t::test::scratch_dir("cli_train");
  RunOptions toy;
  toy.out = (dir / "data").string();
  toy.games = 5;
  toy.players = 1;
  toy.dev_games = 1;
  toy.test_games = 1;
  REQUIRE(cmd_gen_toy(toy) == kOk);

  std::ofstream(dir / "c.json") << R"({"max_len": 10, "beam": 2})";
  RunOptions tr;
  tr.data = toy.out;
  tr.config_path = (dir / "c.json").string();
  tr.out = (dir / "run").string();
  tr.hidden = 8;
  tr.epochs = 2;
  REQUIRE(cmd_train(tr) == kOk);
  for (const char* f : {"config.json", "train_log.json", "last.ckpt.json", "model.ckpt.json"})
    CHECK(fs::exists(dir / "run" / f));
  CHECK(nlohmann::json::parse(slurp(dir / "run" / "train_log.json")).size() == 2);

  RunOptions g;
  g.data = toy.out;
  g.checkpoint = (dir / "run" / "model.ckpt.json").string();
  g.out = (dir / "gen.json").string();
  REQUIRE(cmd_generate(g) == kOk);
  const auto out = summaries_from_json(slurp(g.out));
  REQUIRE(out.size() == 1);
  CHECK(out[0].tokens.size() <= 10);
}

TEST_CASE("gradcheck command reports success") {
  const auto dir = t2t::test::scratch_dir("cli_grad");
  RunOptions o;
  o.out = (dir / "grad.json").string();
  CHECK(cmd_gradcheck(o) == kOk);
  CHECK(fs::exists(o.out));
}
