#include "t2t/encoder.hpp"

#include <numeric>
#include <unordered_map>

#include "t2t/error.hpp"

namespace t2t {

namespace {

// Attention over the allowed (query, key) pairs in `mask`, then
// tanh(W_merge [x; context]).
AttentionOutput masked_self_attention(const Tensor& x, const std::vector<std::uint8_t>& mask,
                                      const Tensor& bilinear, const Tensor& merge) {
  const Tensor scores = matmul_nt(matmul(x, bilinear), x);
  const Tensor weights = masked_softmax_rows(scores, mask);
  const Tensor context = set_matmul(weights, x);
  return {tanh(matmul_nt(concat_cols({x, context}), merge)), weights};
}

std::vector<std::uint8_t> all_but_self(std::size_t n) {
  std::vector<std::uint8_t> m(n * n, 1);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 0;
  return m;
}

// v^T tanh(W [a; b] + b'), one score per row.
Tensor mlp_score(const Tensor& a, const Tensor& b, const Tensor& w, const Tensor& bias,
                 const Tensor& v) {
  return matmul(tanh(add(matmul_nt(concat_cols({a, b}), w), bias)), v);
}

// History attention for a batch of records. `owner[m]` is the record that
// history row m belongs to and `slot[m]` its position index.
AttentionOutput time_attention(const Tensor& records, const Tensor& history,
                               const std::vector<std::size_t>& owner,
                               const std::vector<std::size_t>& slot, const EncoderParams& p,
                               std::size_t window) {
  const std::size_t n = records.rows();
  const std::size_t h = records.cols();
  if (!history.defined() || owner.empty()) {
    const Tensor context = Tensor::zeros(n, h);
    return {tanh(matmul_nt(concat_cols({records, context}), p.time_merge)), Tensor()};
  }
  const Tensor current = add(records, slice_rows(p.position_emb, window, window + 1));
  const Tensor past = add(history, embedding_lookup(p.position_emb, slot));
  const Tensor query = embedding_lookup(current, owner);
  const Tensor scores = mlp_score(query, past, p.time_score_w, p.time_score_b, p.time_score_v);
  const Tensor weights = segment_softmax(scores, owner, n);
  const Tensor context = segment_sum(mul(past, weights), owner, n);
  return {tanh(matmul_nt(concat_cols({records, context}), p.time_merge)), weights};
}

}  // namespace

std::size_t EncodedTables::record_index(TableId t, std::size_t i, std::size_t j) const {
  const auto& l = layout[static_cast<std::size_t>(t)];
  if (i >= l.rows || j >= l.cols) throw ContractError("encoded tables: cell index out of range");
  return l.record_offset + i * l.cols + j;
}

std::vector<double> EncodedTables::fused_at(TableId t, std::size_t i, std::size_t j) const {
  return fused.row(record_index(t, i, j));
}

Tensor embed_records(std::span<const Record> records, const Model& model) {
  const Vocabulary& vocab = model.vocab();
  const EncoderParams& p = model.encoder();
  std::vector<std::size_t> e, c, v, f;
  e.reserve(records.size());
  for (const auto& r : records) {
    e.push_back(vocab.id(r.entity));
    c.push_back(vocab.id(r.rtype));
    v.push_back(vocab.id(r.value));
    f.push_back(static_cast<std::size_t>(r.feature));
  }
  const Tensor x = concat_cols({embedding_lookup(p.entity_emb, e), embedding_lookup(p.type_emb, c),
                                embedding_lookup(p.value_emb, v),
                                embedding_lookup(p.feature_emb, f)});
  return relu(add(matmul_nt(x, p.record_w), p.record_b));
}

Tensor embed_record(const Record& record, const Model& model) {
  return embed_records(std::span<const Record>(&record, 1), model);
}

AttentionOutput encode_row_dim(const Tensor& row_embeddings, const EncoderParams& params) {
  return masked_self_attention(row_embeddings, all_but_self(row_embeddings.rows()),
                               params.row_bilinear, params.row_merge);
}

AttentionOutput encode_col_dim(const Tensor& column_embeddings, const EncoderParams& params) {
  return masked_self_attention(column_embeddings, all_but_self(column_embeddings.rows()),
                               params.col_bilinear, params.col_merge);
}

AttentionOutput encode_time_dim(const Tensor& record_embedding, const Tensor& history_embeddings,
                                const EncoderParams& params, std::size_t window) {
  if (record_embedding.rows() != 1)
    throw DimensionError("encode_time_dim: expects one record, got " +
                         shape_str(record_embedding.shape()));
  std::vector<std::size_t> owner, slot;
  if (history_embeddings.defined()) {
    const std::size_t k = history_embeddings.rows();
    if (k > window)
      throw ContractError("encode_time_dim: history longer than the window");
    for (std::size_t m = 0; m < k; ++m) {
      owner.push_back(0);
      slot.push_back(window - k + m);
    }
  }
  return time_attention(record_embedding, history_embeddings, owner, slot, params, window);
}

FusionOutput fuse(const Tensor& r_row, const Tensor& r_col, const Tensor& r_time,
                  const EncoderParams& p) {
  if (r_row.shape() != r_col.shape() || r_row.shape() != r_time.shape())
    throw DimensionError("fuse: view shapes differ: " + shape_str(r_row.shape()) + ", " +
                         shape_str(r_col.shape()) + ", " + shape_str(r_time.shape()));
  const Tensor general =
      tanh(add(matmul_nt(concat_cols({r_row, r_col, r_time}), p.general_w), p.general_b));
  // One score MLP shared by the three views, so identical views tie.
  auto score = [&](const Tensor& view) {
    return mlp_score(view, general, p.fusion_score_w, p.fusion_score_b, p.fusion_score_v);
  };
  const Tensor weights = softmax_rows(concat_cols({score(r_row), score(r_col), score(r_time)}));
  const Tensor fused = add(add(mul(r_row, slice_cols(weights, 0, 1)),
                               mul(r_col, slice_cols(weights, 1, 2))),
                           mul(r_time, slice_cols(weights, 2, 3)));
  return {fused, weights, general};
}

RowEncoding encode_rows(const Tensor& fused_grid, std::size_t rows, std::size_t cols,
                        const EncoderParams& p) {
  if (rows == 0 || cols == 0 || fused_grid.rows() != rows * cols)
    throw DimensionError("encode_rows: grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " does not match " + shape_str(fused_grid.shape()));
  std::vector<std::size_t> row_of(rows * cols);
  for (std::size_t k = 0; k < row_of.size(); ++k) row_of[k] = k / cols;
  const Tensor pooled = segment_mean(fused_grid, row_of, rows);
  const Tensor scores = matmul_nt(matmul(pooled, p.gate_bilinear), pooled);
  const Tensor attention = masked_softmax_rows(scores, all_but_self(rows));
  const Tensor context = set_matmul(attention, pooled);
  const Tensor gates = sigmoid(add(matmul_nt(concat_cols({pooled, context}), p.gate_w), p.gate_b));
  return {pooled, mul(gates, pooled), gates, attention};
}

EncodedTables encode_tables(const TableSet& tables, const TimelineStore& store, const Model& model) {
  const EncoderParams& p = model.encoder();
  const std::size_t window = model.config().window;
  const Vocabulary& vocab = model.vocab();

  EncodedTables enc;
  enc.vocab_size = vocab.size();

  // Flatten the records, then append every record's history window.
  std::vector<Record> batch;
  for (std::size_t t = 0; t < kNumTables; ++t) {
    const Grid& g = tables.tables[t];
    auto& l = enc.layout[t];
    l.rows = g.rows();
    l.cols = g.cols();
    l.record_offset = batch.size();
    l.row_offset = enc.num_rows;
    for (std::size_t k = 0; k < g.cells.size(); ++k) enc.record_row.push_back(enc.num_rows + k / g.cols());
    batch.insert(batch.end(), g.cells.begin(), g.cells.end());
    enc.num_rows += g.rows();
  }
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("encode_tables: game " + tables.game_id + " has no records");
  enc.num_records = n;

  std::vector<std::size_t> slot;
  for (std::size_t i = 0; i < n; ++i) {
    auto hist = history_window(batch[i], store, window);
    for (std::size_t m = 0; m < hist.size(); ++m) {
      enc.history_owner.push_back(i);
      slot.push_back(window - hist.size() + m);
      batch.push_back(std::move(hist[m]));
    }
  }

  const Tensor all = embed_records(batch, model);
  enc.embedded = n == batch.size() ? all : slice_rows(all, 0, n);
  const Tensor history = n == batch.size() ? Tensor() : slice_rows(all, n, batch.size());

  std::vector<Tensor> row_views, col_views;
  for (std::size_t t = 0; t < kNumTables; ++t) {
    const auto& l = enc.layout[t];
    if (l.rows == 0) continue;
    const std::size_t cells = l.rows * l.cols;
    const Tensor x = slice_rows(enc.embedded, l.record_offset, l.record_offset + cells);
    std::vector<std::uint8_t> same_row(cells * cells, 0), same_col(cells * cells, 0);
    for (std::size_t a = 0; a < cells; ++a)
      for (std::size_t b = 0; b < cells; ++b) {
        if (a == b) continue;
        same_row[a * cells + b] = a / l.cols == b / l.cols;
        same_col[a * cells + b] = a % l.cols == b % l.cols;
      }
    auto row = masked_self_attention(x, same_row, p.row_bilinear, p.row_merge);
    auto col = masked_self_attention(x, same_col, p.col_bilinear, p.col_merge);
    row_views.push_back(row.output);
    col_views.push_back(col.output);
    enc.row_attention[t] = row.weights;
    enc.col_attention[t] = col.weights;
  }
  enc.r_row = row_views.size() == 1 ? row_views[0] : concat_rows(row_views);
  enc.r_col = col_views.size() == 1 ? col_views[0] : concat_rows(col_views);

  auto time = time_attention(enc.embedded, history, enc.history_owner, slot, p, window);
  enc.r_time = time.output;
  enc.time_attention = time.weights;

  auto fusion = fuse(enc.r_row, enc.r_col, enc.r_time, p);
  enc.fused = fusion.fused;
  enc.fusion_weights = fusion.weights;
  enc.r_gen = fusion.general;

  std::vector<Tensor> pooled, gated, gates;
  for (std::size_t t = 0; t < kNumTables; ++t) {
    const auto& l = enc.layout[t];
    if (l.rows == 0) continue;
    const Tensor grid = slice_rows(enc.fused, l.record_offset, l.record_offset + l.rows * l.cols);
    auto r = encode_rows(grid, l.rows, l.cols, p);
    pooled.push_back(r.rows);
    gated.push_back(r.gated);
    gates.push_back(r.gates);
    enc.gate_attention[t] = r.attention;
  }
  enc.rows = pooled.size() == 1 ? pooled[0] : concat_rows(pooled);
  enc.gated_rows = gated.size() == 1 ? gated[0] : concat_rows(gated);
  enc.gates = gates.size() == 1 ? gates[0] : concat_rows(gates);

  std::unordered_map<std::string, std::size_t> extra;
  enc.record_token.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& value = batch[i].value;
    if (vocab.contains(value)) {
      enc.record_token.push_back(vocab.id(value));
      continue;
    }
    auto [it, inserted] = extra.emplace(value, enc.vocab_size + enc.extra_tokens.size());
    if (inserted) enc.extra_tokens.push_back(value);
    enc.record_token.push_back(it->second);
  }
  return enc;
}

}  // namespace t2t
