#include "t2t/baseline.hpp"

#include <algorithm>
#include <charconv>

#include "t2t/error.hpp"

namespace t2t {

namespace {

long parse_points(const Record& r) {
  long v = 0;
  const auto* end = r.value.data() + r.value.size();
  auto [ptr, ec] = std::from_chars(r.value.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw SchemaError("template: non-numeric " + r.rtype + " '" + r.value + "' for " + r.entity);
  return v;
}

std::size_t require_column(const Grid& g, const std::string& rtype, const char* what) {
  const std::size_t j = g.column_index(rtype);
  if (j == g.cols()) throw SchemaError(std::string("template: ") + what + " lacks column " + rtype);
  return j;
}

struct Scorer {
  const Grid* grid;
  std::size_t row;
  long points;
};

}  // namespace

std::vector<std::string> generate_template(const TableSet& tables, const TemplateConfig& config) {
  const Grid& teams = tables.table(TableId::Teams);
  if (teams.rows() != 2)
    throw SchemaError("template: game " + tables.game_id + " needs exactly two team rows");
  const std::size_t team_pts = require_column(teams, config.points_column, "team table");

  std::vector<std::string> out;
  auto emit = [&out](std::initializer_list<std::string> words) {
    out.insert(out.end(), words.begin(), words.end());
  };

  // Row 0 is the home team.
  const long home = parse_points(teams.at(0, team_pts));
  const long away = parse_points(teams.at(1, team_pts));
  const std::size_t winner = away > home ? 1 : 0;
  const std::size_t loser = 1 - winner;
  const std::string& w_pts = teams.at(winner, team_pts).value;
  const std::string& l_pts = teams.at(loser, team_pts).value;
  emit({teams.entities[winner], "(", w_pts, ")", home == away ? "tied" : "defeated",
        teams.entities[loser], "(", l_pts, ")", "."});

  std::vector<Scorer> scorers;
  for (TableId id : {TableId::HomePlayers, TableId::VisitingPlayers}) {
    const Grid& g = tables.table(id);
    if (g.rows() == 0) continue;
    const std::size_t pts = require_column(g, config.points_column, "player table");
    for (std::size_t i = 0; i < g.rows(); ++i) scorers.push_back({&g, i, parse_points(g.at(i, pts))});
  }
  std::sort(scorers.begin(), scorers.end(), [](const Scorer& a, const Scorer& b) {
    if (a.points != b.points) return a.points > b.points;
    return a.grid->entities[a.row] < b.grid->entities[b.row];
  });
  scorers.resize(std::min(scorers.size(), config.top_k_players));

  for (const auto& s : scorers) {
    const Grid& g = *s.grid;
    const std::string& name = g.entities[s.row];
    const std::string& pts = g.at(s.row, g.column_index(config.points_column)).value;
    const std::size_t ast = g.column_index(config.assists_column);
    if (ast < g.cols())
      emit({name, "scored", pts, "with", g.at(s.row, ast).value, "assists", "."});
    else
      emit({name, "scored", pts, "points", "."});
  }

  const std::size_t reb = teams.column_index(config.rebounds_column);
  if (reb < teams.cols())
    emit({teams.entities[winner], "had", teams.at(winner, reb).value, "rebounds", "."});
  else if (winner == 0)
    emit({teams.entities[winner], "won", "at", "home", "."});
  else
    emit({teams.entities[winner], "won", "on", "the", "road", "."});
  return out;
}

}  // namespace t2t
