#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "t2t/data.hpp"
#include "t2t/param.hpp"

namespace t2t {

struct ModelConfig {
  std::size_t hidden = 32;  // H; embeddings share this width
  std::size_t window = 3;   // history window w
  std::size_t vocab_size = 0;
};

/// Encoder weights. Score MLPs have the form v^T tanh(W [a; b] + b').
struct EncoderParams {
  Tensor entity_emb, type_emb, value_emb;  // V x H
  Tensor feature_emb;                      // 2 x H
  Tensor record_w, record_b;               // H x 4H, 1 x H

  Tensor row_bilinear, row_merge;  // H x H, H x 2H
  Tensor col_bilinear, col_merge;

  Tensor position_emb;  // (w + 1) x H; slot w is the current record
  Tensor time_score_w, time_score_b, time_score_v;  // H x 2H, 1 x H, H x 1
  Tensor time_merge;                                // H x 2H

  Tensor general_w, general_b;                      // H x 3H, 1 x H
  Tensor fusion_score_w, fusion_score_b, fusion_score_v;

  Tensor gate_bilinear;        // H x H
  Tensor gate_w, gate_b;       // H x 2H, 1 x H
};

struct DecoderParams {
  Tensor word_emb;            // V x H
  Tensor lstm1_w, lstm1_b;    // 4H x 3H (input: word, feed, hidden)
  Tensor lstm2_w, lstm2_b;    // 4H x 2H
  Tensor init_w, init_b;      // 4H x H: [h1; c1; h2; c2]
  Tensor row_score, record_score;  // H x H bilinear
  Tensor merge_w;             // H x 2H
  Tensor out_w, out_b;        // V x H, 1 x V
  Tensor copy_w, copy_b;      // 1 x H, 1 x 1
};

/// All trainable state plus the vocabulary it was built against.
class Model {
 public:
  Model(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const EncoderParams& encoder() const { return enc_; }
  const DecoderParams& decoder() const { return dec_; }

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParamStore params_;
  EncoderParams enc_;
  DecoderParams dec_;
};

/// Run-time switches for one forward pass.
struct ForwardContext {
  bool train = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Tensor drop(const Tensor& x) const;
};

}  // namespace t2t
