#include "t2t/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "t2t/decoder.hpp"
#include "t2t/encoder.hpp"
#include "t2t/error.hpp"
#include "t2t/eval.hpp"
#include "t2t/toy_corpus.hpp"

namespace t2t {

namespace {

using json = nlohmann::ordered_json;

DecoderState detach_state(const DecoderState& s) {
  return {s.h1.detach(), s.c1.detach(), s.h2.detach(), s.c2.detach(), s.feed.detach()};
}

// Log-probabilities of targets[begin, end) as 1 x 1 tensors, advancing
// `state` and `prev` in place.
std::vector<Tensor> decode_targets(const std::vector<std::size_t>& targets, std::size_t begin,
                                   std::size_t end, DecoderState& state, std::size_t& prev,
                                   const EncodedTables& enc, const Model& model,
                                   const ForwardContext& ctx) {
  std::vector<Tensor> logs;
  logs.reserve(end - begin);
  for (std::size_t t = begin; t < end; ++t) {
    auto [step, next] = decode_step(prev, state, enc, model, ctx);
    logs.push_back(log(token_probability(step, targets[t], enc)));
    state = std::move(next);
    prev = targets[t];
  }
  return logs;
}

Tensor block_loss(const std::vector<Tensor>& logs, double scale) {
  return t2t::scale(sum_all(concat_cols(logs)), -scale);
}

void require_summary(const TableSet& example) {
  if (example.summary.empty())
    throw ContractError("training: game " + example.game_id + " has an empty summary");
}

// Fisher-Yates with the run RNG so the order is the same on every platform.
void shuffle_indices(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("train config: " + what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(lr_decay > 0.0)) fail("lr_decay must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (bptt_block == 0) fail("bptt_block must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (epochs == 0) fail("epochs must be positive");
  if (hidden == 0 || window == 0) fail("hidden and window must be positive");
  if (beam == 0 || max_len == 0) fail("beam and max_len must be positive");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (target_nll < 0.0) fail("target_nll must be non-negative");
}

std::string config_to_json(const TrainConfig& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay"] = c.lr_decay;
  j["batch_size"] = c.batch_size;
  j["bptt_block"] = c.bptt_block;
  j["dropout"] = c.dropout;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["hidden"] = c.hidden;
  j["window"] = c.window;
  j["beam"] = c.beam;
  j["max_len"] = c.max_len;
  j["patience"] = c.patience;
  j["clip_norm"] = c.clip_norm;
  j["epsilon"] = c.epsilon;
  j["target_nll"] = c.target_nll;
  j["shuffle"] = c.shuffle;
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "learning_rate", "lr_decay", "batch_size", "bptt_block", "dropout",   "epochs",
      "seed",          "hidden",   "window",     "beam",       "max_len",   "patience",
      "clip_norm",     "epsilon",  "target_nll", "shuffle"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw SchemaError("config: unknown key '" + key + "'");
  try {
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "lr_decay", c.lr_decay);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "bptt_block", c.bptt_block);
    read_key(j, "dropout", c.dropout);
    read_key(j, "epochs", c.epochs);
    read_key(j, "seed", c.seed);
    read_key(j, "hidden", c.hidden);
    read_key(j, "window", c.window);
    read_key(j, "beam", c.beam);
    read_key(j, "max_len", c.max_len);
    read_key(j, "patience", c.patience);
    read_key(j, "clip_norm", c.clip_norm);
    read_key(j, "epsilon", c.epsilon);
    read_key(j, "target_nll", c.target_nll);
    read_key(j, "shuffle", c.shuffle);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  return c;
}

double nll_loss(std::span<const TableSet> batch, const Model& model, const TimelineStore& store,
                const ForwardContext& ctx) {
  if (batch.empty()) throw ContractError("nll_loss: empty batch");
  NoGradScope no_grad;
  double total = 0.0;
  for (const auto& ex : batch) {
    require_summary(ex);
    const EncodedTables enc = encode_tables(ex, store, model);
    const auto targets = target_ids(ex.summary, enc, model.vocab());
    DecoderState state = initial_state(enc, model, ctx);
    std::size_t prev = Vocabulary::kBos;
    for (const auto& l : decode_targets(targets, 0, targets.size(), state, prev, enc, model, ctx))
      total += l.item();
  }
  return -total / static_cast<double>(batch.size());
}

double mean_token_nll(std::span<const TableSet> games, const Model& model,
                      const TimelineStore& store) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : games) {
    const EncodedTables enc = encode_tables(ex, store, model);
    total -= sequence_log_prob(ex.summary, enc, model);
    tokens += ex.summary.size() + 1;
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

void adagrad_step(ParamStore& params, double lr, double eps) {
  for (auto& p : params.all()) {
    auto d = p.value.impl();
    if (d->grad.empty()) continue;
    for (std::size_t i = 0; i < d->value.size(); ++i) {
      const double g = d->grad[i];
      p.accumulator[i] += g * g;
      d->value[i] -= lr * g / (std::sqrt(p.accumulator[i]) + eps);
    }
  }
}

double clip_gradients(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.all())
    for (double g : p.value.impl()->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& p : params.all())
      for (double& g : p.value.impl()->grad) g *= f;
  }
  return norm;
}

double accumulate_gradients(const TableSet& example, Model& model, const TimelineStore& store,
                            double scale, std::size_t bptt_block, const ForwardContext& ctx) {
  require_summary(example);
  if (bptt_block == 0) throw ContractError("accumulate_gradients: bptt_block must be positive");
  Tape encoder_tape;
  const EncodedTables enc = encode_tables(example, store, model);
  // The decoder reads detached copies; their gradients are pushed back
  // through the encoder once every block has run.
  EncodedTables memory = enc;
  memory.fused = enc.fused.detach(true);
  memory.gated_rows = enc.gated_rows.detach(true);

  const auto targets = target_ids(example.summary, memory, model.vocab());
  DecoderState state;
  std::size_t prev = Vocabulary::kBos;
  double log_prob = 0.0;
  for (std::size_t begin = 0; begin < targets.size(); begin += bptt_block) {
    const std::size_t end = std::min(targets.size(), begin + bptt_block);
    Tape block_tape;
    state = begin == 0 ? initial_state(memory, model, ctx) : detach_state(state);
    const auto logs = decode_targets(targets, begin, end, state, prev, memory, model, ctx);
    for (const auto& l : logs) log_prob += l.item();
    block_tape.backward(block_loss(logs, scale));
  }
  const std::vector<Tensor> outputs{enc.fused, enc.gated_rows};
  const std::vector<std::vector<double>> seeds{memory.fused.grad(), memory.gated_rows.grad()};
  encoder_tape.backward(outputs, seeds);
  return log_prob;
}

double accumulate_gradients_full(const TableSet& example, Model& model, const TimelineStore& store,
                                 double scale, const ForwardContext& ctx) {
  require_summary(example);
  Tape tape;
  const EncodedTables enc = encode_tables(example, store, model);
  const auto targets = target_ids(example.summary, enc, model.vocab());
  DecoderState state = initial_state(enc, model, ctx);
  std::size_t prev = Vocabulary::kBos;
  const auto logs = decode_targets(targets, 0, targets.size(), state, prev, enc, model, ctx);
  double log_prob = 0.0;
  for (const auto& l : logs) log_prob += l.item();
  tape.backward(block_loss(logs, scale));
  return log_prob;
}

std::string log_to_json(std::span<const EpochLog> log) {
  json arr = json::array();
  for (const auto& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_loss"] = e.dev_loss;
    j["dev_bleu"] = e.dev_bleu;
    j["lr"] = e.lr;
    j["clean_train_nll"] = e.clean_train_nll;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

TrainState train(const Dataset& dataset, const TimelineStore& store, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.train.empty()) throw ContractError("train: the training split is empty");

  TrainState st{Model(ModelConfig{config.hidden, config.window, 0}, dataset.vocab, config.seed)};
  st.rng.seed(config.seed ^ 0x9e3779b97f4a7c15ULL);
  st.learning_rate = config.learning_rate;
  ForwardContext ctx{true, config.dropout, &st.rng};

  const auto& train_set = dataset.train;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best_dev_loss = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle_indices(order, st.rng);
    double log_prob = 0.0;
    std::size_t tokens = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - b);
      st.model.params().zero_grad();
      double batch_log_prob = 0.0;
      for (std::size_t k = b; k < end; ++k) {
        const TableSet& ex = train_set[order[k]];
        batch_log_prob +=
            accumulate_gradients(ex, st.model, store, scale, config.bptt_block, ctx);
        tokens += ex.summary.size() + 1;
      }
      const double norm = clip_gradients(st.model.params(), config.clip_norm);
      if (!std::isfinite(batch_log_prob) || !std::isfinite(norm))
        throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b / config.batch_size + 1));
      adagrad_step(st.model.params(), st.learning_rate, config.epsilon);
      log_prob += batch_log_prob;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = -log_prob / static_cast<double>(tokens);
    entry.lr = st.learning_rate;
    st.learning_rate *= config.lr_decay;
    st.epoch = epoch;

    bool improved = false;
    if (!dataset.dev.empty()) {
      entry.dev_loss = mean_token_nll(dataset.dev, st.model, store);
      std::vector<std::vector<std::string>> gen, refs;
      for (const auto& ex : dataset.dev) {
        const EncodedTables enc = encode_tables(ex, store, st.model);
        gen.push_back(beam_search(enc, st.model, config.beam, config.max_len).tokens);
        refs.push_back(ex.summary);
      }
      entry.dev_bleu = bleu(gen, refs);
      improved = entry.dev_bleu > st.best_dev_bleu;
      if (entry.dev_loss < best_dev_loss) {
        best_dev_loss = entry.dev_loss;
        since_improvement = 0;
      } else {
        ++since_improvement;
      }
    } else {
      improved = true;
    }
    if (improved) {
      st.best_dev_bleu = entry.dev_bleu;
      st.best_epoch = epoch;
      st.best_params = st.model.params().snapshot();
    }
    if (config.target_nll > 0.0) entry.clean_train_nll = mean_token_nll(train_set, st.model, store);
    st.log.push_back(entry);

    if (config.target_nll > 0.0 && entry.clean_train_nll < config.target_nll)
      st.stop_reason = "target train NLL reached";
    else if (!dataset.dev.empty() && since_improvement >= config.patience)
      st.stop_reason = "dev loss plateaued";
    if (on_epoch) on_epoch(st);
    if (!st.stop_reason.empty()) break;
  }
  if (st.stop_reason.empty()) st.stop_reason = "epoch limit";
  return st;
}

GradCheckReport model_grad_check(std::uint64_t seed, const GradCheckOptions& options) {
  constexpr std::size_t kVocab = 40;
  ToyOptions toy;
  toy.num_columns = 3;
  toy.num_teams = 2;
  Dataset data = gen_toy_corpus(seed, 3, 1, toy);
  if (data.vocab.size() > kVocab)
    throw ContractError("model_grad_check: fixture vocabulary exceeds " + std::to_string(kVocab));
  for (std::size_t k = 0; data.vocab.size() < kVocab; ++k) data.vocab.add("<fill" + std::to_string(k) + ">");

  const TimelineStore store = build_timelines(data);
  Model model(ModelConfig{8, 2, 0}, data.vocab, seed);
  const TableSet& example = data.train.back();
  auto loss = [&]() {
    const EncodedTables enc = encode_tables(example, store, model);
    const auto targets = target_ids(example.summary, enc, model.vocab());
    DecoderState state = initial_state(enc, model);
    std::size_t prev = Vocabulary::kBos;
    return block_loss(decode_targets(targets, 0, targets.size(), state, prev, enc, model, {}), 1.0);
  };
  return grad_check(loss, model.params().all(), options);
}

}  // namespace t2t
