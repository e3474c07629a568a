#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "t2t/baseline.hpp"
#include "t2t/checkpoint.hpp"
#include "t2t/decoder.hpp"
#include "t2t/encoder.hpp"
#include "t2t/error.hpp"
#include "t2t/eval.hpp"
#include "t2t/toy_corpus.hpp"

namespace fs = std::filesystem;

namespace t2t::cli {

namespace {

using json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
}

// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text << '\n';
  else
    write_file(path, text);
}

// Loads the corpus, mapping a missing directory to exit code 2.
std::optional<Dataset> open_data(const RunOptions& opts, int& code) {
  if (opts.data.empty() || !fs::is_directory(opts.data)) {
    std::cerr << "error: data directory '" << opts.data << "' does not exist\n";
    code = kBadDataPath;
    return std::nullopt;
  }
  try {
    return load_corpus(opts.data);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kBadDataPath;
    return std::nullopt;
  }
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

TrainConfig resolve_config(const RunOptions& opts) {
  TrainConfig c;
  if (!opts.config_path.empty()) c = config_from_json(read_file(opts.config_path), c);
  if (opts.seed) c.seed = *opts.seed;
  if (opts.beam) c.beam = *opts.beam;
  if (opts.window) c.window = *opts.window;
  if (opts.hidden) c.hidden = *opts.hidden;
  if (opts.epochs) c.epochs = *opts.epochs;
  c.validate();
  return c;
}

std::string summaries_to_json(const std::vector<Summary>& summaries) {
  json arr = json::array();
  for (const auto& s : summaries)
    arr.push_back({{"game_id", s.game_id}, {"tokens", s.tokens}, {"log_prob", s.log_prob}});
  return arr.dump(1);
}

std::vector<Summary> summaries_from_json(const std::string& text) {
  std::vector<Summary> out;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw SchemaError("summaries: expected a JSON list");
    for (const auto& e : arr)
      out.push_back({e.at("game_id").get<std::string>(),
                     e.at("tokens").get<std::vector<std::string>>(),
                     e.value("log_prob", 0.0)});
  } catch (const json::exception& e) {
    throw SchemaError(std::string("summaries: ") + e.what());
  }
  return out;
}

int cmd_train(const RunOptions& opts) {
  return guarded([&] {
    int code = kOk;
    auto data = open_data(opts, code);
    if (!data) return code;
    const TrainConfig config = resolve_config(opts);
    const fs::path out = opts.out.empty() ? fs::path("run") : fs::path(opts.out);
    fs::create_directories(out);
    write_file(out / "config.json", config_to_json(config));

    const TimelineStore store = build_timelines(*data);
    auto meta_of = [](const TrainState& st) {
      std::ostringstream rng;
      rng << st.rng;
      return CheckpointMeta{st.epoch, st.learning_rate, st.best_dev_bleu, rng.str()};
    };
    TrainState st = train(*data, store, config, [&](const TrainState& s) {
      const EpochLog& e = s.log.back();
      std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss;
      if (!data->dev.empty()) std::cerr << " dev_loss " << e.dev_loss << " dev_bleu " << e.dev_bleu;
      if (config.target_nll > 0.0) std::cerr << " clean_nll " << e.clean_train_nll;
      std::cerr << " lr " << e.lr << '\n';
      write_file(out / "train_log.json", log_to_json(s.log));
      save_checkpoint(out / "last.ckpt.json", s.model, config, meta_of(s));
    });
    st.model.params().restore(st.best_params);
    CheckpointMeta meta = meta_of(st);
    meta.epoch = st.best_epoch;
    save_checkpoint(out / "model.ckpt.json", st.model, config, meta);
    std::cerr << "stopped after epoch " << st.epoch << " (" << st.stop_reason << "); best epoch "
              << st.best_epoch << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_generate(const RunOptions& opts) {
  return guarded([&] {
    int code = kOk;
    auto data = open_data(opts, code);
    if (!data) return code;
    Checkpoint ck = load_checkpoint(opts.checkpoint);
    const std::size_t beam = opts.beam.value_or(ck.config.beam);
    const TimelineStore store = build_timelines(*data);
    std::vector<Summary> out;
    for (const auto& game : split_of(*data, parse_split(opts.split))) {
      const EncodedTables enc = encode_tables(game, store, ck.model);
      Generation g = beam_search(enc, ck.model, beam, ck.config.max_len);
      out.push_back({game.game_id, std::move(g.tokens), g.log_prob});
    }
    emit(opts.out, summaries_to_json(out));
    return static_cast<int>(kOk);
  });
}

int cmd_evaluate(const RunOptions& opts) {
  return guarded([&] {
    int code = kOk;
    auto data = open_data(opts, code);
    if (!data) return code;
    const auto& games = split_of(*data, parse_split(opts.split));
    const auto summaries = summaries_from_json(read_file(opts.generated));
    std::map<std::string, const std::vector<std::string>*> by_id;
    for (const auto& s : summaries) by_id[s.game_id] = &s.tokens;
    std::vector<std::vector<std::string>> generated;
    for (const auto& g : games) {
      auto it = by_id.find(g.game_id);
      if (it == by_id.end()) throw SchemaError("evaluate: no summary for game " + g.game_id);
      generated.push_back(*it->second);
    }
    emit(opts.out, report_to_json(evaluate(generated, games)));
    return static_cast<int>(kOk);
  });
}

int cmd_template(const RunOptions& opts) {
  return guarded([&] {
    int code = kOk;
    auto data = open_data(opts, code);
    if (!data) return code;
    std::vector<Summary> out;
    for (const auto& game : split_of(*data, parse_split(opts.split)))
      out.push_back({game.game_id, generate_template(game), 0.0});
    emit(opts.out, summaries_to_json(out));
    return static_cast<int>(kOk);
  });
}

int cmd_gradcheck(const RunOptions& opts) {
  return guarded([&] {
    const GradCheckReport r = model_grad_check(opts.seed.value_or(1));
    json j;
    j["max_rel_error"] = r.max_rel_error;
    j["worst_param"] = r.worst_param;
    j["worst_index"] = r.worst_index;
    j["analytic"] = r.worst_analytic;
    j["numeric"] = r.worst_numeric;
    j["coordinates"] = r.coordinates_checked;
    j["passed"] = r.passed;
    emit(opts.out, j.dump(2));
    return static_cast<int>(r.passed ? kOk : kFailure);
  });
}

int cmd_gen_toy(const RunOptions& opts) {
  return guarded([&] {
    if (opts.out.empty()) throw ContractError("gen-toy: --out is required");
    ToyOptions toy;
    toy.dev_games = opts.dev_games;
    toy.test_games = opts.test_games;
    save_corpus(gen_toy_corpus(opts.seed.value_or(7), opts.games, opts.players, toy), opts.out);
    return static_cast<int>(kOk);
  });
}

}  // namespace t2t::cli
