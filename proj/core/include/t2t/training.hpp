#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "t2t/data.hpp"
#include "t2t/grad_check.hpp"
#include "t2t/model.hpp"

namespace t2t {

struct TrainConfig {
  double learning_rate = 0.15;
  double lr_decay = 0.97;  // multiplied into the rate after every epoch
  std::size_t batch_size = 5;
  std::size_t bptt_block = 100;
  double dropout = 0.3;
  std::size_t epochs = 500;
  std::uint64_t seed = 1;
  std::size_t hidden = 32;
  std::size_t window = 3;
  std::size_t beam = 5;
  std::size_t max_len = 60;
  std::size_t patience = 25;  // epochs without dev-loss improvement before stopping
  double clip_norm = 5.0;
  double epsilon = 1e-8;
  double target_nll = 0.0;  // stop once clean per-token train NLL drops below; 0 disables
  bool shuffle = true;

  /// Throws ContractError on out-of-range settings.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string config_to_json(const TrainConfig& config);
/// Overlays the keys present in `text` onto `base`. Unknown keys are a
/// SchemaError.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});

/// -(1/G) * sum of example log-likelihoods, G = batch.size(). Dropout is
/// active when `ctx.train` is set.
double nll_loss(std::span<const TableSet> batch, const Model& model, const TimelineStore& store,
                const ForwardContext& ctx = {});

/// Average negative log-likelihood per target token (summary plus end
/// token), dropout off.
double mean_token_nll(std::span<const TableSet> games, const Model& model,
                      const TimelineStore& store);

/// acc += g^2; theta -= lr * g / (sqrt(acc) + eps). Parameters without a
/// gradient are left alone.
void adagrad_step(ParamStore& params, double lr, double eps = 1e-8);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(ParamStore& params, double max_norm);

/// Adds d(-scale * log P(summary)) into the parameter gradients, cutting
/// the decoder's gradient flow every `bptt_block` tokens. Returns log P.
double accumulate_gradients(const TableSet& example, Model& model, const TimelineStore& store,
                            double scale, std::size_t bptt_block, const ForwardContext& ctx = {});
/// Same quantity through one tape spanning the whole sequence.
double accumulate_gradients_full(const TableSet& example, Model& model, const TimelineStore& store,
                                 double scale, const ForwardContext& ctx = {});

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // per-token NLL with dropout, averaged over the epoch
  double dev_loss = 0.0;    // per-token NLL on dev; 0 without a dev split
  double dev_bleu = 0.0;
  double lr = 0.0;          // rate used during the epoch
  double clean_train_nll = 0.0;  // only measured when a target NLL is set
};

std::string log_to_json(std::span<const EpochLog> log);

struct TrainState {
  Model model;
  std::size_t epoch = 0;
  double learning_rate = 0.0;  // rate for the next epoch
  double best_dev_bleu = -1.0;
  std::size_t best_epoch = 0;
  ParamStore::Snapshot best_params;  // best dev BLEU, or the latest epoch without dev data
  std::vector<EpochLog> log;
  std::mt19937_64 rng;
  std::string stop_reason;
};

using EpochCallback = std::function<void(const TrainState&)>;

/// Full training run. Throws NumericError naming the epoch and batch when
/// the loss stops being finite.
TrainState train(const Dataset& dataset, const TimelineStore& store, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

/// Gradient check of the whole model on a tiny fixture: hidden 8, two
/// players, three columns, window 2, vocabulary 40.
GradCheckReport model_grad_check(std::uint64_t seed = 1, const GradCheckOptions& options = {});

}  // namespace t2t
