#include "t2t/toy_corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <string>

#include "t2t/baseline.hpp"
#include "t2t/error.hpp"

namespace t2t {

namespace {

constexpr std::array<const char*, 8> kTeams = {"Hawks",  "Bulls", "Celtics", "Heat",
                                               "Knicks", "Suns",  "Nets",    "Jazz"};

constexpr std::array<const char*, 40> kSurnames = {
    "Jefferson", "Wall",    "Neal",    "Henderson", "Beal",    "Gortat",  "Walker",  "Kemp",
    "Batum",     "Porter",  "Morris",  "Zeller",    "Lamb",    "Temple",  "Nene",    "Oubre",
    "Marion",    "Pierce",  "Allen",   "Rondo",     "Horford", "Millsap", "Korver",  "Teague",
    "Butler",    "Rose",    "Noah",    "Gasol",     "Dragic",  "Wade",    "Bosh",    "Deng",
    "Lopez",     "Young",   "Bogdan",  "Hood",      "Favors",  "Gobert",  "Exum",    "Burks"};

constexpr std::array<const char*, 6> kColumns = {"PTS", "AST", "REB", "FGM", "FGA", "WIN"};

struct Draw {
  std::mt19937_64 rng;
  int uniform(int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

struct Line {
  std::array<int, 5> stats{};  // PTS AST REB FGM FGA
};

Line draw_player(Draw& d) {
  Line l;
  const int fgm = d.uniform(0, 10);
  l.stats[3] = fgm;
  l.stats[4] = fgm + d.uniform(0, 8);
  l.stats[0] = 2 * fgm + d.uniform(0, 5);
  l.stats[1] = d.uniform(0, 10);
  l.stats[2] = d.uniform(0, 12);
  return l;
}

std::string player_name(std::size_t index) {
  std::string name = kSurnames[index % kSurnames.size()];
  if (index >= kSurnames.size()) name += std::to_string(index / kSurnames.size());
  return name;
}

Record make_record(const std::string& entity, std::size_t col, std::string value, Feature f,
                   int date, TableId table, std::size_t row, const std::string& game_id) {
  return Record{entity, kColumns[col], std::move(value), f, date, table, row, col, game_id};
}

}  // namespace

Dataset gen_toy_corpus(std::uint64_t seed, std::size_t games, std::size_t players_per_team,
                       const ToyOptions& options) {
  if (games == 0 || players_per_team == 0)
    throw ContractError("gen_toy_corpus: games and players_per_team must be positive");
  if (options.dev_games + options.test_games >= games)
    throw ContractError("gen_toy_corpus: dev and test games leave no training games");
  if (options.num_columns == 0 || options.num_columns > kColumns.size())
    throw ContractError("gen_toy_corpus: num_columns must be in [1, 6]");
  const std::size_t num_teams = std::clamp<std::size_t>(options.num_teams, 2, kTeams.size());

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < num_teams; ++a)
    for (std::size_t b = a + 1; b < num_teams; ++b) pairs.emplace_back(a, b);

  Draw draw{std::mt19937_64(seed)};
  const int base_date = parse_iso_date("2016-10-25");
  const std::size_t ncols = options.num_columns;

  std::vector<TableSet> all;
  for (std::size_t g = 0; g < games; ++g) {
    auto [a, b] = pairs[g % pairs.size()];
    if ((g / pairs.size()) % 2 == 1) std::swap(a, b);
    const std::array<std::size_t, 2> side = {a, b};  // home, visiting

    TableSet ts;
    char id[48];
    std::snprintf(id, sizeof id, "toy%llu-g%04zu", static_cast<unsigned long long>(seed), g);
    ts.game_id = id;
    ts.date = base_date + static_cast<int>(g);

    std::array<std::vector<Line>, 2> lines;
    std::array<Line, 2> totals;
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t k = 0; k < players_per_team; ++k) {
        lines[s].push_back(draw_player(draw));
        for (std::size_t c = 0; c < 5; ++c) totals[s].stats[c] += lines[s].back().stats[c];
      }
    }
    const int home_pts = totals[0].stats[0], away_pts = totals[1].stats[0];
    auto outcome = [&](std::size_t s) {
      if (home_pts == away_pts) return std::string("T");
      return (s == 0) == (home_pts > away_pts) ? std::string("W") : std::string("L");
    };
    auto value_of = [&](const Line& l, std::size_t s, std::size_t col) {
      return col < 5 ? std::to_string(l.stats[col]) : outcome(s);
    };

    for (std::size_t s = 0; s < 2; ++s) {
      const TableId tid = s == 0 ? TableId::HomePlayers : TableId::VisitingPlayers;
      const Feature f = s == 0 ? Feature::Home : Feature::Visiting;
      Grid& grid = ts.tables[static_cast<std::size_t>(tid)];
      for (std::size_t c = 0; c < ncols; ++c) grid.columns.push_back(kColumns[c]);
      for (std::size_t k = 0; k < players_per_team; ++k) {
        const std::string name = player_name(side[s] * players_per_team + k);
        grid.entities.push_back(name);
        for (std::size_t c = 0; c < ncols; ++c)
          grid.cells.push_back(
              make_record(name, c, value_of(lines[s][k], s, c), f, ts.date, tid, k, ts.game_id));
      }
    }
    Grid& teams = ts.tables[static_cast<std::size_t>(TableId::Teams)];
    for (std::size_t c = 0; c < ncols; ++c) teams.columns.push_back(kColumns[c]);
    for (std::size_t s = 0; s < 2; ++s) {
      const std::string name = kTeams[side[s]];
      teams.entities.push_back(name);
      for (std::size_t c = 0; c < ncols; ++c)
        teams.cells.push_back(make_record(name, c, value_of(totals[s], s, c),
                                          s == 0 ? Feature::Home : Feature::Visiting, ts.date,
                                          TableId::Teams, s, ts.game_id));
    }
    ts.summary = generate_template(ts);
    all.push_back(std::move(ts));
  }

  Dataset d;
  const std::size_t n_train = games - options.dev_games - options.test_games;
  d.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.dev.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
               all.begin() + static_cast<std::ptrdiff_t>(n_train + options.dev_games));
  d.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + options.dev_games), all.end());
  d.vocab = build_vocabulary(d.train);
  return d;
}

}  // namespace t2t
