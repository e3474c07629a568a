#include "t2t/model.hpp"

#include "t2t/error.hpp"

namespace t2t {

Model::Model(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  if (config_.hidden == 0 || config_.window == 0)
    throw ContractError("model: hidden size and window must be positive");
  config_.vocab_size = vocab_.size();
  const std::size_t H = config_.hidden;
  const std::size_t V = config_.vocab_size;
  std::mt19937_64 rng(seed);
  auto add = [&](const char* name, std::size_t r, std::size_t c) {
    return params_.add(name, r, c, rng);
  };

  enc_.entity_emb = add("enc.entity_emb", V, H);
  enc_.type_emb = add("enc.type_emb", V, H);
  enc_.value_emb = add("enc.value_emb", V, H);
  enc_.feature_emb = add("enc.feature_emb", 2, H);
  enc_.record_w = add("enc.record_w", H, 4 * H);
  enc_.record_b = add("enc.record_b", 1, H);
  enc_.row_bilinear = add("enc.row_bilinear", H, H);
  enc_.row_merge = add("enc.row_merge", H, 2 * H);
  enc_.col_bilinear = add("enc.col_bilinear", H, H);
  enc_.col_merge = add("enc.col_merge", H, 2 * H);
  enc_.position_emb = add("enc.position_emb", config_.window + 1, H);
  enc_.time_score_w = add("enc.time_score_w", H, 2 * H);
  enc_.time_score_b = add("enc.time_score_b", 1, H);
  enc_.time_score_v = add("enc.time_score_v", H, 1);
  enc_.time_merge = add("enc.time_merge", H, 2 * H);
  enc_.general_w = add("enc.general_w", H, 3 * H);
  enc_.general_b = add("enc.general_b", 1, H);
  enc_.fusion_score_w = add("enc.fusion_score_w", H, 2 * H);
  enc_.fusion_score_b = add("enc.fusion_score_b", 1, H);
  enc_.fusion_score_v = add("enc.fusion_score_v", H, 1);
  enc_.gate_bilinear = add("enc.gate_bilinear", H, H);
  enc_.gate_w = add("enc.gate_w", H, 2 * H);
  enc_.gate_b = add("enc.gate_b", 1, H);

  dec_.word_emb = add("dec.word_emb", V, H);
  dec_.lstm1_w = add("dec.lstm1_w", 4 * H, 3 * H);
  dec_.lstm1_b = add("dec.lstm1_b", 1, 4 * H);
  dec_.lstm2_w = add("dec.lstm2_w", 4 * H, 2 * H);
  dec_.lstm2_b = add("dec.lstm2_b", 1, 4 * H);
  dec_.init_w = add("dec.init_w", 4 * H, H);
  dec_.init_b = add("dec.init_b", 1, 4 * H);
  dec_.row_score = add("dec.row_score", H, H);
  dec_.record_score = add("dec.record_score", H, H);
  dec_.merge_w = add("dec.merge_w", H, 2 * H);
  dec_.out_w = add("dec.out_w", V, H);
  dec_.out_b = add("dec.out_b", 1, V);
  dec_.copy_w = add("dec.copy_w", 1, H);
  dec_.copy_b = add("dec.copy_b", 1, 1);
}

Tensor ForwardContext::drop(const Tensor& x) const {
  if (!train || dropout <= 0.0) return x;
  if (!rng) throw ContractError("forward: dropout requires an RNG");
  return t2t::dropout(x, dropout, *rng, true);
}

}  // namespace t2t
