#pragma once

// Two-layer LSTM decoder with input feeding, row-then-record attention and a
// conditional copy switch over table values.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "t2t/encoder.hpp"
#include "t2t/model.hpp"

namespace t2t {

struct DecoderState {
  Tensor h1, c1, h2, c2;  // 1 x H each
  Tensor feed;            // previous attentional state, 1 x H
};

struct DualAttention {
  Tensor beta;   // R x 1 over every row of every table
  Tensor gamma;  // N x 1, normalized within each row
  Tensor alpha;  // N x 1, beta[row(r)] * gamma[r]
};

struct DecodeStep {
  Tensor d;        // top LSTM output, 1 x H
  Tensor d_tilde;  // attentional state, 1 x H
  Tensor context;  // 1 x H
  Tensor beta, gamma, alpha;
  Tensor p_copy;    // 1 x 1
  Tensor gen_dist;  // 1 x V
};

/// Affine map of the mean gated row to [h1; c1; h2; c2]; zero input feed.
DecoderState initial_state(const EncodedTables& enc, const Model& model,
                           const ForwardContext& ctx = {});

DualAttention dual_attention(const Tensor& d, const EncodedTables& enc, const DecoderParams& p);

/// One decoder step. `prev` is an extended-vocabulary id; ids of copied
/// out-of-vocabulary values are embedded as the unknown token.
std::pair<DecodeStep, DecoderState> decode_step(std::size_t prev, const DecoderState& state,
                                                const EncodedTables& enc, const Model& model,
                                                const ForwardContext& ctx = {});

/// P(y) = p_copy * sum of alpha over records emitting y + (1 - p_copy) * gen(y),
/// as a differentiable 1 x 1 tensor.
Tensor token_probability(const DecodeStep& step, std::size_t token, const EncodedTables& enc);

/// The full mixture over the extended vocabulary (vocabulary, then copied
/// out-of-vocabulary values).
std::vector<double> output_distribution(const DecodeStep& step, const EncodedTables& enc);

/// Teacher-forcing targets: the summary mapped to extended ids, then the end
/// token. Unknown tokens that no record can copy become the unknown id.
std::vector<std::size_t> target_ids(std::span<const std::string> summary, const EncodedTables& enc,
                                    const Vocabulary& vocab);
std::string token_string(std::size_t id, const EncodedTables& enc, const Vocabulary& vocab);

/// Sum of log P(y_t | y_<t) over the summary and its end token, dropout off.
/// An empty summary scores 0.
double sequence_log_prob(std::span<const std::string> summary, const EncodedTables& enc,
                         const Model& model);

struct Generation {
  std::vector<std::size_t> ids;     // without the end token
  std::vector<std::string> tokens;
  double log_prob = 0.0;
  bool finished = false;  // false when cut at max_len
};

/// Argmax decoding; ties go to the lowest id.
Generation greedy_decode(const EncodedTables& enc, const Model& model, std::size_t max_len);

/// Beam search without length normalization. The best completed hypothesis
/// wins; ties go to the earlier completion, then the smaller id sequence.
Generation beam_search(const EncodedTables& enc, const Model& model, std::size_t beam,
                       std::size_t max_len);

}  // namespace t2t
