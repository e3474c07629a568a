#pragma once

// Hierarchical table encoder. Each record is embedded, re-encoded against
// its row, its column and its own history, the three views are fused by a
// softmax gate, and rows are mean-pooled then gated by row self-attention.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "t2t/data.hpp"
#include "t2t/model.hpp"

namespace t2t {

/// Self-attention output plus the weights that produced it.
struct AttentionOutput {
  Tensor output;   // n x H
  Tensor weights;  // n x n for set attention, m x 1 for history attention
};

struct FusionOutput {
  Tensor fused;    // n x H
  Tensor weights;  // n x 3: row, column, time
  Tensor general;  // n x H baseline representation
};

struct RowEncoding {
  Tensor rows;       // R x H mean-pooled
  Tensor gated;      // R x H
  Tensor gates;      // R x H, in (0, 1)
  Tensor attention;  // R x R gate-context weights
};

/// Position of one table inside the flattened record and row lists.
struct TableLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t record_offset = 0;
  std::size_t row_offset = 0;
};

struct EncodedTables {
  // Records of all non-empty tables, table-major then row-major.
  Tensor embedded;        // N x H
  Tensor r_row, r_col, r_time, r_gen;
  Tensor fusion_weights;  // N x 3
  Tensor fused;           // N x H
  Tensor rows;            // R x H
  Tensor gated_rows;      // R x H
  Tensor gates;           // R x H

  std::array<Tensor, kNumTables> row_attention;   // per table, n_t x n_t (undefined if empty)
  std::array<Tensor, kNumTables> col_attention;
  std::array<Tensor, kNumTables> gate_attention;  // R_t x R_t
  Tensor time_attention;                   // M x 1, undefined when no record has history
  std::vector<std::size_t> history_owner;  // history slot -> record index

  std::array<TableLayout, kNumTables> layout;
  std::vector<std::size_t> record_row;  // record -> global row index
  std::size_t num_records = 0;
  std::size_t num_rows = 0;

  // Copy targets: the extended-vocabulary id each record's value emits.
  // Values outside the vocabulary receive ids V, V+1, ... in `extra_tokens`.
  std::vector<std::size_t> record_token;
  std::vector<std::string> extra_tokens;
  std::size_t vocab_size = 0;

  std::size_t extended_size() const { return vocab_size + extra_tokens.size(); }
  std::size_t record_index(TableId t, std::size_t i, std::size_t j) const;
  std::vector<double> fused_at(TableId t, std::size_t i, std::size_t j) const;
};

/// Record embeddings r = ReLU(W_a [e; c; v; f] + b_a), one row per record.
Tensor embed_records(std::span<const Record> records, const Model& model);
Tensor embed_record(const Record& record, const Model& model);

/// Self-attention among the records of one row (n x H, n >= 1). A single
/// record attends to nothing and gets a zero context.
AttentionOutput encode_row_dim(const Tensor& row_embeddings, const EncoderParams& params);
AttentionOutput encode_col_dim(const Tensor& column_embeddings, const EncoderParams& params);

/// History attention for one record (1 x H) over up to `window` earlier
/// embeddings (k x H, oldest first, k <= window). Pass an undefined tensor
/// for an empty history.
AttentionOutput encode_time_dim(const Tensor& record_embedding, const Tensor& history_embeddings,
                                const EncoderParams& params, std::size_t window);

/// Gated combination of the three views; accepts n x H batches.
FusionOutput fuse(const Tensor& r_row, const Tensor& r_col, const Tensor& r_time,
                  const EncoderParams& params);

/// Mean pooling of a fused rows x cols grid (flattened row-major) and the
/// content-selection gate over rows.
RowEncoding encode_rows(const Tensor& fused_grid, std::size_t rows, std::size_t cols,
                        const EncoderParams& params);

EncodedTables encode_tables(const TableSet& tables, const TimelineStore& store, const Model& model);

}  // namespace t2t
