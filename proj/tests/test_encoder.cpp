#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "t2t/encoder.hpp"
#include "t2t/error.hpp"
#include "t2t/toy_corpus.hpp"

using namespace t2t;
using t2t::test::random_tensor;
using t2t::test::values;

namespace {

struct Fixture {
  Dataset data = gen_toy_corpus(5, 8, 3);
  TimelineStore store = build_timelines(data);
  Model model{ModelConfig{8, 3, 0}, data.vocab, 11};
};

void fill(Tensor t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

bool close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

}  // namespace

TEST_CASE("record embeddings are non-negative") {
  Fixture f;
  const auto& cells = f.data.train[0].table(TableId::HomePlayers).cells;
  const Tensor e = embed_records(cells, f.model);
  CHECK(e.shape() == Shape{cells.size(), 8});
  for (double v : e.data()) CHECK(v >= 0.0);
}

TEST_CASE("zero record weights leave relu of the bias") {
  Fixture f;
  fill(f.model.encoder().record_w, 0.0);
  const Tensor b = f.model.encoder().record_b;
  const Tensor e = embed_record(f.data.train[0].table(TableId::Teams).at(0, 0), f.model);
  for (std::size_t k = 0; k < 8; ++k) CHECK(e.at(0, k) == std::max(0.0, b.at(0, k)));
}

TEST_CASE("a single-record row gets a zero context") {
  Fixture f;
  const EncoderParams& p = f.model.encoder();
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(1, 8, rng);
  const auto out = encode_row_dim(x, p);
  const Tensor expected = tanh(matmul_nt(concat_cols({x, Tensor::zeros(1, 8)}), p.row_merge));
  CHECK(values(out.output) == values(expected));
  CHECK(values(out.weights) == std::vector<double>{0.0});
}

TEST_CASE("identical records in a row share attention evenly") {
  Fixture f;
  std::mt19937_64 rng(3);
  const Tensor one = random_tensor(1, 8, rng);
  const auto out = encode_row_dim(concat_rows({one, one, one}), f.model.encoder());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(out.weights.at(i, j) == (i == j ? 0.0 : 0.5));
  CHECK(out.output.row(0) == out.output.row(2));
}

TEST_CASE("a column of two records attends fully to the other") {
  Fixture f;
  std::mt19937_64 rng(4);
  const auto out = encode_col_dim(random_tensor(2, 8, rng), f.model.encoder());
  CHECK(values(out.weights) == std::vector<double>{0.0, 1.0, 1.0, 0.0});
}

TEST_CASE("history attention") {
  Fixture f;
  const EncoderParams& p = f.model.encoder();
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(1, 8, rng);

  SUBCASE("empty history uses a zero context") {
    const auto out = encode_time_dim(x, Tensor(), p, 3);
    const Tensor expected = tanh(matmul_nt(concat_cols({x, Tensor::zeros(1, 8)}), p.time_merge));
    CHECK(values(out.output) == values(expected));
    CHECK_FALSE(out.weights.defined());
  }
  SUBCASE("one earlier record takes all the weight") {
    const auto out = encode_time_dim(x, random_tensor(1, 8, rng), p, 3);
    CHECK(values(out.weights) == std::vector<double>{1.0});
  }
  SUBCASE("weights over a full window sum to one") {
    const auto out = encode_time_dim(x, random_tensor(3, 8, rng), p, 3);
    double s = 0.0;
    for (double w : out.weights.data()) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("longer than the window is rejected") {
    CHECK_THROWS_AS(encode_time_dim(x, random_tensor(4, 8, rng), p, 3), ContractError);
  }
}

TEST_CASE("fusing three identical views returns the view") {
  Fixture f;
  std::mt19937_64 rng(6);
  const Tensor v = random_tensor(5, 8, rng);
  const auto out = fuse(v, v, v, f.model.encoder());
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(out.weights.at(i, k) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(close(values(out.fused), values(v), 1e-12));
  CHECK_THROWS_AS(fuse(v, v, random_tensor(4, 8, rng), f.model.encoder()), DimensionError);
}

TEST_CASE("fusion weights are a distribution") {
  Fixture f;
  std::mt19937_64 rng(7);
  const auto out = fuse(random_tensor(6, 8, rng), random_tensor(6, 8, rng), random_tensor(6, 8, rng),
                        f.model.encoder());
  for (std::size_t i = 0; i < 6; ++i) {
    const auto w = out.weights.row(i);
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : w) CHECK(x > 0.0);
  }
}

TEST_CASE("row pooling and the content-selection gate") {
  Fixture f;
  std::mt19937_64 rng(8);
  const Tensor grid = random_tensor(6, 8, rng);
  const auto r = encode_rows(grid, 2, 3, f.model.encoder());
  CHECK(r.rows.shape() == Shape{2, 8});
  for (std::size_t k = 0; k < 8; ++k)
    CHECK(r.rows.at(0, k) == doctest::Approx((grid.at(0, k) + grid.at(1, k) + grid.at(2, k)) / 3));
  for (std::size_t i = 0; i < r.gates.size(); ++i) {
    CHECK(r.gates.data()[i] > 0.0);
    CHECK(r.gates.data()[i] < 1.0);
    CHECK(r.gated.data()[i] == r.gates.data()[i] * r.rows.data()[i]);
  }
  CHECK(values(r.attention) == std::vector<double>{0, 1, 1, 0});

  const auto single = encode_rows(slice_rows(grid, 0, 3), 1, 3, f.model.encoder());
  const EncoderParams& p = f.model.encoder();
  const Tensor expected =
      sigmoid(add(matmul_nt(concat_cols({single.rows, Tensor::zeros(1, 8)}), p.gate_w), p.gate_b));
  CHECK(values(single.gates) == values(expected));
  CHECK_THROWS_AS(encode_rows(grid, 4, 3, p), DimensionError);
}

TEST_CASE("encoded tables have consistent shapes") {
  Fixture f;
  const TableSet& g = f.data.train.back();
  const EncodedTables enc = encode_tables(g, f.store, f.model);
  const std::size_t n = g.num_records();
  std::size_t rows = 0;
  for (const auto& t : g.tables) rows += t.rows();
  CHECK(enc.num_records == n);
  CHECK(enc.num_rows == rows);
  CHECK(enc.fused.shape() == Shape{n, 8});
  CHECK(enc.fusion_weights.shape() == Shape{n, 3});
  CHECK(enc.gated_rows.shape() == Shape{rows, 8});
  CHECK(enc.record_row.size() == n);
  CHECK(enc.record_token.size() == n);
  CHECK(enc.extended_size() >= enc.vocab_size);
  // Every record in a later game has history, so time attention exists.
  CHECK(enc.time_attention.defined());
  CHECK(enc.fused_at(TableId::Teams, 1, 0) == enc.fused.row(enc.record_index(TableId::Teams, 1, 0)));
  CHECK_THROWS_AS(enc.record_index(TableId::Teams, 2, 0), ContractError);
}

TEST_CASE("swapping two player rows permutes the encoding exactly") {
  Fixture f;
  TableSet g = f.data.train.back();
  const EncodedTables a = encode_tables(g, f.store, f.model);
  Grid& home = g.tables[0];
  const std::size_t c = home.cols();
  std::swap(home.entities[0], home.entities[2]);
  for (std::size_t j = 0; j < c; ++j) std::swap(home.cells[j], home.cells[2 * c + j]);
  const EncodedTables b = encode_tables(g, f.store, f.model);
  for (std::size_t j = 0; j < c; ++j) {
    CHECK(a.fused_at(TableId::HomePlayers, 0, j) == b.fused_at(TableId::HomePlayers, 2, j));
    CHECK(a.fused_at(TableId::HomePlayers, 1, j) == b.fused_at(TableId::HomePlayers, 1, j));
  }
  CHECK(a.gated_rows.row(0) == b.gated_rows.row(2));
  CHECK(a.gated_rows.row(3) == b.gated_rows.row(3));
}

TEST_CASE("first-game records fall back to the empty history") {
  Fixture f;
  const TableSet& first = f.data.train.front();
  const EncodedTables enc = encode_tables(first, f.store, f.model);
  CHECK(enc.history_owner.empty());
  const EncoderParams& p = f.model.encoder();
  const Tensor expected =
      tanh(matmul_nt(concat_cols({enc.embedded, Tensor::zeros(enc.num_records, 8)}), p.time_merge));
  CHECK(values(enc.r_time) == values(expected));
}

TEST_CASE("encoding golden") {
  Fixture f;
  const EncodedTables enc = encode_tables(f.data.train[3], f.store, f.model);
  const auto w = enc.fusion_weights.row(0);
  CHECK(w[0] == doctest::Approx(0.33325513888370689).epsilon(1e-12));
}
