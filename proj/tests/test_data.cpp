#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "helpers.hpp"
#include "t2t/data.hpp"
#include "t2t/error.hpp"
#include "t2t/toy_corpus.hpp"

using namespace t2t;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

fs::path corpus_with(const std::string& name, const std::string& train, const std::string& dev = "[]",
                     const std::string& test = "[]") {
  auto dir = t2t::test::scratch_dir(name);
  write(dir / "train.json", train);
  write(dir / "dev.json", dev);
  write(dir / "test.json", test);
  return dir;
}

Record rec(const std::string& e, const std::string& c, int date, const std::string& game) {
  Record r;
  r.entity = e;
  r.rtype = c;
  r.value = "1";
  r.date = date;
  r.game_id = game;
  return r;
}

}  // namespace

TEST_CASE("empty splits give reserved-only vocabulary") {
  const Dataset d = load_corpus(corpus_with("empty", "[]"));
  CHECK(d.train.empty());
  CHECK(d.dev.empty());
  CHECK(d.test.empty());
  CHECK(d.vocab.size() == Vocabulary::kNumReserved);
  CHECK(d.vocab.token(Vocabulary::kEos) == "</s>");
}

TEST_CASE("one game with two players and three columns has nine records") {
  const Dataset d = load_corpus(corpus_with("one", "[" + t2t::test::game_json("g1", "2016-11-01") + "]"));
  REQUIRE(d.train.size() == 1);
  const TableSet& g = d.train[0];
  CHECK(g.num_records() == 9);
  CHECK(g.table(TableId::Teams).rows() == 1);
  const Record& r = g.table(TableId::VisitingPlayers).at(0, 0);
  CHECK(r.entity == "KembaWalker");
  CHECK(r.rtype == "PTS");
  CHECK(r.value == "22");
  CHECK(r.feature == Feature::Visiting);
  CHECK(r.date == parse_iso_date("2016-11-01"));
  CHECK(r.game_id == "g1");
  CHECK(d.vocab.contains("AlJefferson"));
  CHECK(d.vocab.contains("points"));
}

TEST_CASE("missing files and directories are IO errors") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/t2t"), IoError);
  auto dir = t2t::test::scratch_dir("missing_file");
  write(dir / "train.json", "[]");
  CHECK_THROWS_AS(load_corpus(dir), IoError);
}

TEST_CASE("schema errors name the game") {
  auto expect_schema = [](const std::string& game, const std::string& needle) {
    try {
      load_corpus(corpus_with("schema", "[" + game + "]"));
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_schema(R"({"game_id": "g9", "date": "2016-11-01", "home_players": {}, "vis_players": {},
                    "summary": []})",
                "g9");
  expect_schema(R"({"game_id": "g8", "home_players": {}, "vis_players": {}, "teams": {},
                    "summary": []})",
                "g8");
  expect_schema(R"({"game_id": "g7", "date": "2016-13-01", "home_players": {}, "vis_players": {},
                    "teams": {}, "summary": []})",
                "g7");
  CHECK_THROWS_AS(load_corpus(corpus_with("dupe", "[" + t2t::test::game_json("g1", "2016-11-01") + "]",
                                          "[" + t2t::test::game_json("g1", "2016-11-02") + "]")),
                  SchemaError);
}

TEST_CASE("save and load round-trip") {
  const Dataset d = gen_toy_corpus(3, 6, 2, ToyOptions{1, 1});
  auto dir = t2t::test::scratch_dir("roundtrip");
  save_corpus(d, dir);
  CHECK(load_corpus(dir) == d);
}

TEST_CASE("iso dates") {
  CHECK(parse_iso_date("1970-01-01") == 0);
  CHECK(parse_iso_date("2016-10-25") == 17099);
  CHECK(format_iso_date(17099) == "2016-10-25");
  CHECK_THROWS_AS(parse_iso_date("2016/10/25"), SchemaError);
}

TEST_CASE("timelines are date sorted") {
  TableSet a, b;
  a.game_id = "ga";
  b.game_id = "gb";
  Grid ga, gb;
  ga.entities = {"AlJefferson"};
  ga.columns = {"PTS"};
  ga.cells = {rec("AlJefferson", "PTS", 5, "ga")};
  gb = ga;
  gb.cells = {rec("AlJefferson", "PTS", 2, "gb")};
  a.tables[0] = ga;
  b.tables[0] = gb;
  const std::vector<TableSet> games{a, b};
  const TimelineStore store = build_timelines(games);
  const auto* seq = store.find("AlJefferson", "PTS");
  REQUIRE(seq != nullptr);
  REQUIRE(seq->size() == 2);
  CHECK((*seq)[0].date == 2);
  CHECK((*seq)[1].date == 5);

  const std::vector<TableSet> one{a};
  CHECK(build_timelines(one).find("AlJefferson", "PTS")->size() == 1);
  CHECK(build_timelines(std::vector<TableSet>{}).index().empty());
}

TEST_CASE("four games with two players and three types") {
  std::string train = "[";
  for (int k = 1; k <= 4; ++k)
    train += (k > 1 ? "," : "") + t2t::test::game_json("g" + std::to_string(k), "2016-11-0" + std::to_string(k));
  const Dataset d = load_corpus(corpus_with("four", train + "]"));
  const TimelineStore store = build_timelines(d);
  CHECK(store.num_entities() == 3);
  CHECK(store.num_types() == 3);
  for (const char* player : {"AlJefferson", "KembaWalker"})
    for (const char* type : {"PTS", "AST", "REB"}) CHECK(store.find(player, type)->size() == 4);

  std::size_t total = 0;
  for (const auto& [key, seq] : store.index()) total += seq.size();
  CHECK(total == 4 * d.train[0].num_records());
}

TEST_CASE("timelines ignore corpus order") {
  Dataset d = gen_toy_corpus(9, 12, 3);
  const TimelineStore before = build_timelines(d);
  std::reverse(d.train.begin(), d.train.end());
  std::rotate(d.train.begin(), d.train.begin() + 5, d.train.end());
  CHECK(build_timelines(d) == before);
}

TEST_CASE("history window examples") {
  TableSet base;
  Grid g;
  g.entities = {"AlJefferson"};
  g.columns = {"PTS"};
  std::vector<TableSet> games;
  for (int day = 1; day <= 5; ++day) {
    TableSet t;
    t.game_id = "g" + std::to_string(day);
    t.date = day;
    g.cells = {rec("AlJefferson", "PTS", day, t.game_id)};
    t.tables[0] = g;
    games.push_back(t);
  }
  const TimelineStore store = build_timelines(games);
  auto dates = [&](int day, std::size_t w) {
    std::vector<int> out;
    for (const auto& r : history_window(rec("AlJefferson", "PTS", day, "q"), store, w))
      out.push_back(r.date);
    return out;
  };
  CHECK(dates(5, 3) == std::vector<int>{2, 3, 4});
  CHECK(dates(1, 3).empty());
  CHECK(dates(3, 10) == std::vector<int>{1, 2});
  CHECK(history_window(rec("Nobody", "PTS", 5, "q"), store, 3).empty());
  CHECK_THROWS_AS(history_window(rec("AlJefferson", "PTS", 5, "q"), store, 0), ContractError);
}

TEST_CASE("toy corpus is deterministic") {
  const Dataset a = gen_toy_corpus(7, 20, 4);
  const Dataset b = gen_toy_corpus(7, 20, 4);
  CHECK(games_to_json(a.train) == games_to_json(b.train));
  CHECK(a == b);
  CHECK(gen_toy_corpus(8, 20, 4) != a);
}

TEST_CASE("smallest toy corpus") {
  const Dataset d = gen_toy_corpus(1, 1, 1);
  REQUIRE(d.train.size() == 1);
  CHECK(d.train[0].table(TableId::HomePlayers).rows() == 1);
  CHECK(d.train[0].table(TableId::VisitingPlayers).rows() == 1);
  CHECK(d.train[0].table(TableId::Teams).rows() == 2);
}

TEST_CASE("toy corpus golden vocabulary size") {
  const Dataset d = gen_toy_corpus(7, 20, 4);
  CHECK(d.vocab.size() == 101);
}

TEST_CASE("toy splits are disjoint, dated and consistent") {
  const Dataset d = gen_toy_corpus(7, 20, 4, ToyOptions{3, 2});
  CHECK(d.train.size() == 15);
  CHECK(d.dev.size() == 3);
  CHECK(d.test.size() == 2);
  int last = -1;
  for (const auto* split : {&d.train, &d.dev, &d.test})
    for (const auto& g : *split) {
      CHECK(g.date > last);
      last = g.date;
      for (const auto& t : g.tables)
        for (const auto& r : t.cells) CHECK(r.date == g.date);
    }
}
