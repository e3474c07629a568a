#pragma once

#include <cstddef>
#include <cstdint>

#include "t2t/data.hpp"

namespace t2t {

struct ToyOptions {
  std::size_t dev_games = 0;   // taken from the end of the schedule, before test
  std::size_t test_games = 0;  // the last games of the schedule
  std::size_t num_columns = 6;  // prefix of PTS, AST, REB, FGM, FGA, WIN
  std::size_t num_teams = 4;
};

/// Synthetic league: fixed rosters, round-robin schedule on consecutive
/// days, small-integer box scores, template summaries. Deterministic in
/// `seed`.
Dataset gen_toy_corpus(std::uint64_t seed, std::size_t games, std::size_t players_per_team,
                       const ToyOptions& options = {});

}  // namespace t2t
