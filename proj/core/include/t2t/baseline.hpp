#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "t2t/data.hpp"

namespace t2t {

/// Eight-sentence template summarizer: an intro with both team scores and
/// the winner, one sentence per top scorer, and a closing sentence.
struct TemplateConfig {
  std::size_t top_k_players = 6;
  std::string points_column = "PTS";
  std::string assists_column = "AST";
  std::string rebounds_column = "REB";
};

/// Throws SchemaError when the team grid does not hold exactly two rows or
/// a grid lacks the points column.
std::vector<std::string> generate_template(const TableSet& tables, const TemplateConfig& config = {});

}  // namespace t2t
