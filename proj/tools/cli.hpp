#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t2t/data.hpp"
#include "t2t/training.hpp"

namespace t2t::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadDataPath = 2,
  kBadCheckpoint = 3,
};

/// Settings shared by the subcommands. Unset optionals fall back to the
/// config file, then to the built-in defaults.
struct RunOptions {
  std::string config_path;
  std::string data;
  std::string split = "test";
  std::string checkpoint;
  std::string out;
  std::string generated;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> beam;
  std::optional<std::size_t> window;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> epochs;

  // gen-toy
  std::size_t games = 10;
  std::size_t players = 4;
  std::size_t dev_games = 0;
  std::size_t test_games = 0;
};

/// defaults < --config file < flags.
TrainConfig resolve_config(const RunOptions& opts);

struct Summary {
  std::string game_id;
  std::vector<std::string> tokens;
  double log_prob = 0.0;
};
std::string summaries_to_json(const std::vector<Summary>& summaries);
std::vector<Summary> summaries_from_json(const std::string& text);

int cmd_train(const RunOptions& opts);
int cmd_generate(const RunOptions& opts);
int cmd_evaluate(const RunOptions& opts);
int cmd_template(const RunOptions& opts);
int cmd_gradcheck(const RunOptions& opts);
int cmd_gen_toy(const RunOptions& opts);

}  // namespace t2t::cli
