#include "t2t/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "t2t/error.hpp"

namespace t2t {

namespace {

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& c, const Tensor& w,
                                    const Tensor& b) {
  const std::size_t h = c.cols();
  const Tensor z = add(matmul_nt(x, w), b);
  const Tensor i = sigmoid(slice_cols(z, 0, h));
  const Tensor f = sigmoid(slice_cols(z, h, 2 * h));
  const Tensor g = tanh(slice_cols(z, 2 * h, 3 * h));
  const Tensor o = sigmoid(slice_cols(z, 3 * h, 4 * h));
  const Tensor c_next = add(mul(f, c), mul(i, g));
  return {mul(o, tanh(c_next)), c_next};
}

struct Hypothesis {
  std::vector<std::size_t> ids;
  double log_prob = 0.0;
  DecoderState state;
};

struct Finished {
  std::vector<std::size_t> ids;
  double log_prob = 0.0;
  std::size_t completed_at = 0;
  bool finished = false;
};

bool better_finished(const Finished& a, const Finished& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.completed_at != b.completed_at) return a.completed_at < b.completed_at;
  return a.ids < b.ids;
}

bool selectable(std::size_t id) { return id != Vocabulary::kPad && id != Vocabulary::kBos; }

Generation to_generation(const Finished& f, const EncodedTables& enc, const Vocabulary& vocab) {
  Generation g;
  g.ids = f.ids;
  g.log_prob = f.log_prob;
  g.finished = f.finished;
  for (std::size_t id : f.ids) g.tokens.push_back(token_string(id, enc, vocab));
  return g;
}

}  // namespace

DecoderState initial_state(const EncodedTables& enc, const Model& model, const ForwardContext&) {
  const DecoderParams& p = model.decoder();
  const std::size_t h = model.config().hidden;
  const Tensor summary = mean_over_axis(enc.gated_rows, 0);
  const Tensor s = add(matmul_nt(summary, p.init_w), p.init_b);
  DecoderState st;
  st.h1 = slice_cols(s, 0, h);
  st.c1 = slice_cols(s, h, 2 * h);
  st.h2 = slice_cols(s, 2 * h, 3 * h);
  st.c2 = slice_cols(s, 3 * h, 4 * h);
  st.feed = Tensor::zeros(1, h);
  return st;
}

DualAttention dual_attention(const Tensor& d, const EncodedTables& enc, const DecoderParams& p) {
  const Tensor row_scores = matmul_nt(matmul(enc.gated_rows, p.row_score), d);
  const Tensor beta =
      segment_softmax(row_scores, std::vector<std::size_t>(enc.num_rows, 0), 1);
  const Tensor record_scores = matmul_nt(matmul(enc.fused, p.record_score), d);
  const Tensor gamma = segment_softmax(record_scores, enc.record_row, enc.num_rows);
  const Tensor alpha = mul(gamma, embedding_lookup(beta, enc.record_row));
  return {beta, gamma, alpha};
}

std::pair<DecodeStep, DecoderState> decode_step(std::size_t prev, const DecoderState& state,
                                                const EncodedTables& enc, const Model& model,
                                                const ForwardContext& ctx) {
  if (prev >= enc.extended_size())
    throw ContractError("decode_step: token id " + std::to_string(prev) +
                        " is outside the extended vocabulary of size " +
                        std::to_string(enc.extended_size()));
  const DecoderParams& p = model.decoder();
  const std::size_t input = prev < enc.vocab_size ? prev : Vocabulary::kUnk;

  const Tensor word = ctx.drop(embedding_lookup(p.word_emb, {input}));
  DecoderState next;
  std::tie(next.h1, next.c1) =
      lstm_cell(concat_cols({word, state.feed, state.h1}), state.c1, p.lstm1_w, p.lstm1_b);
  std::tie(next.h2, next.c2) =
      lstm_cell(concat_cols({ctx.drop(next.h1), state.h2}), state.c2, p.lstm2_w, p.lstm2_b);

  DecodeStep step;
  step.d = next.h2;
  auto att = dual_attention(step.d, enc, p);
  step.beta = att.beta;
  step.gamma = att.gamma;
  step.alpha = att.alpha;
  step.context = matmul(transpose(att.alpha), enc.fused);
  step.d_tilde = tanh(matmul_nt(concat_cols({step.d, step.context}), p.merge_w));
  step.gen_dist = softmax_rows(add(matmul_nt(ctx.drop(step.d_tilde), p.out_w), p.out_b));
  step.p_copy = sigmoid(add(matmul_nt(step.d, p.copy_w), p.copy_b));
  next.feed = step.d_tilde;
  return {step, next};
}

Tensor token_probability(const DecodeStep& step, std::size_t token, const EncodedTables& enc) {
  Tensor gen;
  if (token < enc.vocab_size)
    gen = mul(one_minus(step.p_copy), slice_cols(step.gen_dist, token, token + 1));
  std::vector<std::size_t> sources;
  for (std::size_t r = 0; r < enc.record_token.size(); ++r)
    if (enc.record_token[r] == token) sources.push_back(r);
  if (sources.empty()) {
    if (!gen.defined())
      throw ContractError("token_probability: id " + std::to_string(token) +
                          " can be neither generated nor copied");
    return gen;
  }
  const Tensor copy = mul(step.p_copy, sum_all(embedding_lookup(step.alpha, sources)));
  return gen.defined() ? add(copy, gen) : copy;
}

std::vector<double> output_distribution(const DecodeStep& step, const EncodedTables& enc) {
  std::vector<double> dist(enc.extended_size(), 0.0);
  const double pc = step.p_copy.item();
  auto gen = step.gen_dist.data();
  for (std::size_t y = 0; y < enc.vocab_size; ++y) dist[y] = (1.0 - pc) * gen[y];
  auto alpha = step.alpha.data();
  for (std::size_t r = 0; r < enc.record_token.size(); ++r)
    dist[enc.record_token[r]] += pc * alpha[r];
  return dist;
}

std::vector<std::size_t> target_ids(std::span<const std::string> summary, const EncodedTables& enc,
                                    const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(summary.size() + 1);
  for (const auto& tok : summary) {
    if (vocab.contains(tok)) {
      ids.push_back(vocab.id(tok));
      continue;
    }
    auto it = std::find(enc.extra_tokens.begin(), enc.extra_tokens.end(), tok);
    ids.push_back(it == enc.extra_tokens.end()
                      ? Vocabulary::kUnk
                      : enc.vocab_size + static_cast<std::size_t>(it - enc.extra_tokens.begin()));
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::string token_string(std::size_t id, const EncodedTables& enc, const Vocabulary& vocab) {
  if (id < enc.vocab_size) return vocab.token(id);
  if (id < enc.extended_size()) return enc.extra_tokens[id - enc.vocab_size];
  throw ContractError("token_string: id " + std::to_string(id) + " out of range");
}

double sequence_log_prob(std::span<const std::string> summary, const EncodedTables& enc,
                         const Model& model) {
  if (summary.empty()) return 0.0;
  NoGradScope no_grad;
  DecoderState state = initial_state(enc, model);
  std::size_t prev = Vocabulary::kBos;
  double total = 0.0;
  for (std::size_t y : target_ids(summary, enc, model.vocab())) {
    auto [step, next] = decode_step(prev, state, enc, model);
    total += std::log(token_probability(step, y, enc).item());
    state = std::move(next);
    prev = y;
  }
  return total;
}

Generation greedy_decode(const EncodedTables& enc, const Model& model, std::size_t max_len) {
  if (max_len == 0) throw ContractError("greedy_decode: max_len must be positive");
  NoGradScope no_grad;
  DecoderState state = initial_state(enc, model);
  Finished out;
  std::size_t prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto [step, next] = decode_step(prev, state, enc, model);
    const auto dist = output_distribution(step, enc);
    std::size_t best = dist.size();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < dist.size(); ++y) {
      if (!selectable(y) || dist[y] <= 0.0) continue;
      const double score = out.log_prob + std::log(dist[y]);
      if (best == dist.size() || score > best_score) {
        best = y;
        best_score = score;
      }
    }
    if (best == dist.size()) break;
    out.log_prob = best_score;
    if (best == Vocabulary::kEos) {
      out.finished = true;
      break;
    }
    out.ids.push_back(best);
    state = std::move(next);
    prev = best;
  }
  return to_generation(out, enc, model.vocab());
}

Generation beam_search(const EncodedTables& enc, const Model& model, std::size_t beam,
                       std::size_t max_len) {
  if (beam == 0 || max_len == 0)
    throw ContractError("beam_search: beam and max_len must be positive");
  NoGradScope no_grad;

  std::vector<Hypothesis> live(1);
  live[0].state = initial_state(enc, model);
  std::vector<Finished> finished;

  struct Candidate {
    double score;
    std::size_t hyp;
    std::size_t token;
  };

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Candidate> cands;
    std::vector<DecoderState> next_states;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const std::size_t prev = live[h].ids.empty() ? Vocabulary::kBos : live[h].ids.back();
      auto [step, next] = decode_step(prev, live[h].state, enc, model);
      next_states.push_back(std::move(next));
      const auto dist = output_distribution(step, enc);
      for (std::size_t y = 0; y < dist.size(); ++y) {
        if (!selectable(y) || dist[y] <= 0.0) continue;
        cands.push_back({live[h].log_prob + std::log(dist[y]), h, y});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& ia = live[a.hyp].ids;
      const auto& ib = live[b.hyp].ids;
      if (ia != ib) return ia < ib;
      return a.token < b.token;
    });

    std::vector<Hypothesis> grown;
    for (const auto& c : cands) {
      if (grown.size() == beam) break;
      if (c.token == Vocabulary::kEos) {
        finished.push_back({live[c.hyp].ids, c.score, t, true});
        continue;
      }
      Hypothesis h;
      h.ids = live[c.hyp].ids;
      h.ids.push_back(c.token);
      h.log_prob = c.score;
      h.state = next_states[c.hyp];
      grown.push_back(std::move(h));
    }
    live = std::move(grown);

    if (!live.empty() && !finished.empty()) {
      const auto best =
          std::min_element(finished.begin(), finished.end(), better_finished)->log_prob;
      // Extending a hypothesis can only lower its score.
      if (best >= live.front().log_prob) live.clear();
    }
  }
  for (const auto& h : live) finished.push_back({h.ids, h.log_prob, max_len, false});
  if (finished.empty()) return {};
  return to_generation(*std::min_element(finished.begin(), finished.end(), better_finished), enc,
                       model.vocab());
}

}  // namespace t2t
