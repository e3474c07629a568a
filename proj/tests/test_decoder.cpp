#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "t2t/decoder.hpp"
#include "t2t/error.hpp"
#include "t2t/toy_corpus.hpp"
#include "t2t/training.hpp"

using namespace t2t;
using t2t::test::values;

namespace {

struct Fixture {
  Dataset data = gen_toy_corpus(5, 8, 3);
  TimelineStore store = build_timelines(data);
  Model model{ModelConfig{8, 3, 0}, data.vocab, 11};
  EncodedTables enc = encode_tables(data.train[4], store, model);
};

double total(const Tensor& t) {
  const auto v = values(t);
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

TEST_CASE("dual attention is a distribution over records") {
  Fixture f;
  auto [step, state] = decode_step(Vocabulary::kBos, initial_state(f.enc, f.model), f.enc, f.model);
  CHECK(step.alpha.shape() == Shape{f.enc.num_records, 1});
  CHECK(step.beta.shape() == Shape{f.enc.num_rows, 1});
  CHECK(total(step.alpha) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(total(step.beta) == doctest::Approx(1.0).epsilon(1e-12));
  // Within-row weights sum to one per row.
  std::vector<double> per_row(f.enc.num_rows, 0.0);
  for (std::size_t r = 0; r < f.enc.num_records; ++r) {
    per_row[f.enc.record_row[r]] += step.gamma.at(r, 0);
    CHECK(step.alpha.at(r, 0) == step.beta.at(f.enc.record_row[r], 0) * step.gamma.at(r, 0));
  }
  for (double s : per_row) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(step.p_copy.item() > 0.0);
  CHECK(step.p_copy.item() < 1.0);
}

TEST_CASE("a single record takes all attention") {
  Dataset d = gen_toy_corpus(1, 1, 1, ToyOptions{0, 0, 1, 2});
  TableSet g = d.train[0];
  g.tables[0] = Grid{};
  g.tables[1] = Grid{};
  g.tables[2].entities.resize(1);
  g.tables[2].cells.resize(1);
  const TimelineStore store = build_timelines(std::vector<TableSet>{g});
  Model model(ModelConfig{8, 2, 0}, d.vocab, 3);
  const EncodedTables enc = encode_tables(g, store, model);
  auto [step, state] = decode_step(Vocabulary::kBos, initial_state(enc, model), enc, model);
  CHECK(values(step.alpha) == std::vector<double>{1.0});
}

TEST_CASE("the output mixture sums to one over the extended vocabulary") {
  Fixture f;
  DecoderState s = initial_state(f.enc, f.model);
  std::size_t prev = Vocabulary::kBos;
  for (int t = 0; t < 10; ++t) {
    auto [step, next] = decode_step(prev, s, f.enc, f.model);
    const auto dist = output_distribution(step, f.enc);
    CHECK(dist.size() == f.enc.extended_size());
    CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    prev = f.enc.record_token[static_cast<std::size_t>(t) % f.enc.num_records];
    CHECK(token_probability(step, prev, f.enc).item() == doctest::Approx(dist[prev]).epsilon(1e-14));
    s = next;
  }
}

TEST_CASE("ids outside the extended vocabulary are rejected") {
  Fixture f;
  CHECK_THROWS_AS(decode_step(f.enc.extended_size(), initial_state(f.enc, f.model), f.enc, f.model),
                  ContractError);
}

TEST_CASE("target ids end with the end token") {
  Fixture f;
  const std::vector<std::string> summary{"never-seen-token", "."};
  const auto ids = target_ids(summary, f.enc, f.model.vocab());
  CHECK(ids == std::vector<std::size_t>{Vocabulary::kUnk, f.model.vocab().id("."), Vocabulary::kEos});
  CHECK(token_string(Vocabulary::kEos, f.enc, f.model.vocab()) == "</s>");
}

TEST_CASE("beam of one equals greedy decoding") {
  Fixture f;
  const Generation g = greedy_decode(f.enc, f.model, 12);
  const Generation b = beam_search(f.enc, f.model, 1, 12);
  CHECK(g.ids == b.ids);
  CHECK(g.log_prob == b.log_prob);
  CHECK(g.tokens.size() == g.ids.size());
}

TEST_CASE("decoded lengths respect max_len and scores are log probabilities") {
  Fixture f;
  for (std::size_t max_len : {1u, 3u, 8u}) {
    for (std::size_t beam : {1u, 3u, 5u}) {
      const Generation g = beam_search(f.enc, f.model, beam, max_len);
      CHECK(g.ids.size() <= max_len);
      CHECK(g.log_prob <= 0.0);
    }
  }
}

TEST_CASE("wider beams never score below greedy when both finish") {
  Fixture f;
  const Generation g = greedy_decode(f.enc, f.model, 200);
  const Generation b = beam_search(f.enc, f.model, 5, 200);
  if (g.finished && b.finished) CHECK(b.log_prob >= g.log_prob - 1e-12);
}

TEST_CASE("sequence log probability") {
  Fixture f;
  CHECK(sequence_log_prob({}, f.enc, f.model) == 0.0);
  const auto& summary = f.data.train[4].summary;
  const double lp = sequence_log_prob(summary, f.enc, f.model);
  CHECK(lp < 0.0);
  const std::vector<TableSet> batch{f.data.train[4]};
  CHECK(lp == doctest::Approx(-nll_loss(batch, f.model, f.store)).epsilon(1e-12));
}

TEST_CASE("decoder golden") {
  Fixture f;
  auto [step, state] = decode_step(Vocabulary::kBos, initial_state(f.enc, f.model), f.enc, f.model);
  CHECK(step.p_copy.item() == doctest::Approx(0.50359755069998569).epsilon(1e-12));
}
