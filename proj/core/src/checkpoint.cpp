#include "t2t/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "t2t/error.hpp"

namespace t2t {

namespace {

using json = nlohmann::ordered_json;
constexpr const char* kFormat = "t2t-checkpoint";

}  // namespace

std::string checkpoint_to_json(const Model& model, const TrainConfig& config,
                               const CheckpointMeta& meta) {
  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = json::parse(config_to_json(config));
  j["model"] = {{"hidden", model.config().hidden}, {"window", model.config().window}};
  j["vocab"] = model.vocab().tokens();
  j["meta"] = {{"epoch", meta.epoch},
               {"learning_rate", meta.learning_rate},
               {"best_dev_bleu", meta.best_dev_bleu},
               {"rng_state", meta.rng_state}};
  json params = json::array();
  for (const auto& p : model.params().all()) {
    json e;
    e["name"] = p.name;
    e["shape"] = p.value.shape();
    e["values"] = std::vector<double>(p.value.data().begin(), p.value.data().end());
    e["accumulator"] = p.accumulator;
    params.push_back(std::move(e));
  }
  j["params"] = std::move(params);
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", "") != kFormat)
      throw CheckpointError("checkpoint: not a t2t checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));

    const auto tokens = j.at("vocab").get<std::vector<std::string>>();
    Vocabulary vocab;
    if (tokens.size() < Vocabulary::kNumReserved)
      throw CheckpointError("checkpoint: vocabulary lacks the reserved tokens");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i < Vocabulary::kNumReserved) {
        if (tokens[i] != vocab.token(i)) throw CheckpointError("checkpoint: reserved token mismatch");
        continue;
      }
      if (vocab.add(tokens[i]) != i) throw CheckpointError("checkpoint: duplicate vocabulary token");
    }

    const TrainConfig config = config_from_json(j.at("config").dump());
    ModelConfig mc;
    mc.hidden = j.at("model").at("hidden").get<std::size_t>();
    mc.window = j.at("model").at("window").get<std::size_t>();
    Checkpoint ck{Model(mc, std::move(vocab), 0), config, {}};

    const json& m = j.at("meta");
    ck.meta.epoch = m.at("epoch").get<std::size_t>();
    ck.meta.learning_rate = m.at("learning_rate").get<double>();
    ck.meta.best_dev_bleu = m.at("best_dev_bleu").get<double>();
    ck.meta.rng_state = m.at("rng_state").get<std::string>();

    const json& params = j.at("params");
    auto& store = ck.model.params().all();
    if (params.size() != store.size())
      throw CheckpointError("checkpoint: expected " + std::to_string(store.size()) +
                            " parameters, found " + std::to_string(params.size()));
    for (std::size_t k = 0; k < store.size(); ++k) {
      Parameter& p = store[k];
      const json& e = params[k];
      if (e.at("name").get<std::string>() != p.name)
        throw CheckpointError("checkpoint: parameter " + std::to_string(k) + " should be '" +
                              p.name + "'");
      if (e.at("shape").get<Shape>() != p.value.shape())
        throw CheckpointError("checkpoint: shape mismatch for '" + p.name + "'");
      const auto values = e.at("values").get<std::vector<double>>();
      const auto acc = e.at("accumulator").get<std::vector<double>>();
      if (values.size() != p.value.size() || acc.size() != p.value.size())
        throw CheckpointError("checkpoint: truncated values for '" + p.name + "'");
      std::copy(values.begin(), values.end(), p.value.mutable_data().begin());
      p.accumulator = acc;
    }
    return ck;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const SchemaError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainConfig& config, const CheckpointMeta& meta) {
  const std::string text = checkpoint_to_json(model, config, meta);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("checkpoint: cannot rename to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace t2t
