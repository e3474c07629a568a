#pragma once

// Versioned JSON checkpoints: run config, vocabulary, training progress and
// every parameter with its Adagrad accumulator. Doubles round-trip exactly.

#include <cstddef>
#include <filesystem>
#include <string>

#include "t2t/model.hpp"
#include "t2t/training.hpp"

namespace t2t {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double best_dev_bleu = 0.0;
  std::string rng_state;  // textual std::mt19937_64 state; may be empty
};

struct Checkpoint {
  Model model;
  TrainConfig config;
  CheckpointMeta meta;
};

std::string checkpoint_to_json(const Model& model, const TrainConfig& config,
                               const CheckpointMeta& meta);
/// Throws CheckpointError on malformed, truncated or inconsistent input.
Checkpoint checkpoint_from_json(const std::string& text);

/// Writes through a temporary file and a rename.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainConfig& config, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace t2t
