#include <benchmark/benchmark.h>

#include <random>

#include "t2t/decoder.hpp"
#include "t2t/encoder.hpp"
#include "t2t/eval.hpp"
#include "t2t/tensor.hpp"
#include "t2t/toy_corpus.hpp"
#include "t2t/training.hpp"

namespace {

using namespace t2t;

struct Fixture {
  Dataset data = gen_toy_corpus(7, 10, 4);
  TimelineStore store = build_timelines(data);
  Model model{ModelConfig{32, 3, 0}, data.vocab, 1};
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a(n * n), b(n * n);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  const Tensor ta = Tensor::from(n, n, a), tb = Tensor::from(n, n, b);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(ta, tb));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

void BM_EncodeTables(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(encode_tables(f.data.train.back(), f.store, f.model));
}
BENCHMARK(BM_EncodeTables);

void BM_TrainStep(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    f.model.params().zero_grad();
    benchmark::DoNotOptimize(accumulate_gradients(f.data.train.back(), f.model, f.store, 1.0, 100));
  }
}
BENCHMARK(BM_TrainStep);

void BM_BeamSearch(benchmark::State& state) {
  auto& f = fixture();
  const EncodedTables enc = encode_tables(f.data.train.back(), f.store, f.model);
  for (auto _ : state)
    benchmark::DoNotOptimize(beam_search(enc, f.model, static_cast<std::size_t>(state.range(0)), 60));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(5);

void BM_Bleu(benchmark::State& state) {
  auto& f = fixture();
  std::vector<std::vector<std::string>> refs;
  for (const auto& g : f.data.train) refs.push_back(g.summary);
  for (auto _ : state) benchmark::DoNotOptimize(bleu(refs, refs));
}
BENCHMARK(BM_Bleu);

}  // namespace
BENCHMARK_MAIN();
