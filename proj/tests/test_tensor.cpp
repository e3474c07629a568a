#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "t2t/error.hpp"
#include "t2t/grad_check.hpp"
#include "t2t/param.hpp"
#include "t2t/tensor.hpp"

using namespace t2t;
using t2t::test::random_tensor;
using t2t::test::values;

TEST_CASE("softmax of equal logits is uniform") {
  const Tensor y = softmax_rows(Tensor::from(1, 2, {0.0, 0.0}));
  CHECK(y.at(0, 0) == 0.5);
  CHECK(y.at(0, 1) == 0.5);
}

TEST_CASE("tanh and sigmoid at zero") {
  CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
}

TEST_CASE("matmul hand example") {
  const Tensor y = matmul(Tensor::from(2, 2, {1, 2, 3, 4}), Tensor::from(2, 1, {1, 1}));
  CHECK(y.shape() == Shape{2, 1});
  CHECK(values(y) == std::vector<double>{3, 7});
}

TEST_CASE("shape mismatch names the primitive and both shapes") {
  try {
    matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)), DimensionError);
  CHECK_THROWS_AS(concat_cols({Tensor::zeros(2, 1), Tensor::zeros(3, 1)}), DimensionError);
}

TEST_CASE("backward of sum gives ones") {
  Tensor w = Tensor::leaf(2, 3, {1, 2, 3, 4, 5, 6});
  Tape tape;
  tape.backward(sum_all(w));
  CHECK(w.grad() == std::vector<double>(6, 1.0));
}

TEST_CASE("sigmoid derivative at zero") {
  Tensor w = Tensor::leaf(1, 1, {0.0});
  Tape tape;
  tape.backward(sigmoid(w));
  CHECK(w.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward rejects a non-scalar loss and unrecorded outputs") {
  Tensor w = Tensor::leaf(1, 2, {1.0, 2.0});
  Tape tape;
  CHECK_THROWS_AS(tape.backward(tanh(w)), ContractError);
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), ContractError);
}

TEST_CASE("unreachable leaves keep a zero gradient") {
  Tensor a = Tensor::leaf(1, 1, {1.0});
  Tensor b = Tensor::leaf(1, 1, {2.0});
  Tape tape;
  Tensor unused = tanh(b);
  tape.backward(mul(a, a));
  CHECK(a.grad()[0] == 2.0);
  CHECK(b.grad()[0] == 0.0);
}

TEST_CASE("no recording without a tape or inside a no-grad scope") {
  Tensor w = Tensor::leaf(1, 1, {1.0});
  CHECK_FALSE(tanh(w).requires_grad());
  Tape tape;
  CHECK(tanh(w).requires_grad());
  {
    NoGradScope off;
    CHECK_FALSE(tanh(w).requires_grad());
    CHECK(Tape::active() == nullptr);
  }
  CHECK(Tape::active() == &tape);
}

TEST_CASE("random three-layer MLP passes finite differences") {
  std::mt19937_64 rng(3);
  ParamStore store;
  store.add("w1", 6, 4, rng, 0.5);
  store.add("b1", 1, 6, rng, 0.5);
  store.add("w2", 5, 6, rng, 0.5);
  store.add("w3", 1, 5, rng, 0.5);
  const Tensor x = random_tensor(3, 4, rng);
  auto& p = store.all();
  auto f = [&] {
    Tensor h = tanh(add(matmul_nt(x, p[0].value), p[1].value));
    h = sigmoid(matmul_nt(h, p[2].value));
    return sum_all(exp(matmul_nt(h, p[3].value)));
  };
  const auto report = grad_check(f, p);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-7);
  CHECK(report.coordinates_checked == store.num_coordinates());
}

TEST_CASE("linear map has exact finite differences") {
  std::mt19937_64 rng(5);
  ParamStore store;
  store.add("w", 1, 7, rng);
  const Tensor x = random_tensor(7, 1, rng);
  const auto report = grad_check([&] { return matmul(store.all()[0].value, x); }, store.all());
  CHECK(report.max_rel_error < 1e-10);
}

TEST_CASE("a corrupted backward rule is reported with its parameter") {
  std::mt19937_64 rng(9);
  ParamStore store;
  store.add("good", 1, 3, rng);
  store.add("bad", 1, 3, rng);
  auto broken_square = [](const Tensor& a) {
    std::vector<double> out;
    for (double v : a.data()) out.push_back(v * v);
    return make_op("broken_square", {a}, a.rows(), a.cols(), std::move(out),
                   [](const Tape::Node& n) {
                     auto& in = *n.inputs[0];
                     in.ensure_grad();
                     for (std::size_t i = 0; i < in.value.size(); ++i)
                       in.grad[i] += n.output->grad[i] * 3.0 * in.value[i];  // should be 2x
                   });
  };
  auto& p = store.all();
  auto f = [&] { return add(sum_all(tanh(p[0].value)), sum_all(broken_square(p[1].value))); };
  const auto report = grad_check(f, p);
  CHECK_FALSE(report.passed);
  CHECK(report.worst_param == "bad");
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(11);
  Tensor w = Tensor::leaf(2, 2, values(random_tensor(2, 2, rng)));
  auto grad_of = [&](double a, double b) {
    w.zero_grad();
    Tape tape;
    const Tensor f = sum_all(tanh(w));
    const Tensor g = sum_all(mul(w, w));
    tape.backward(add(scale(f, a), scale(g, b)));
    return w.grad();
  };
  const auto gf = grad_of(1, 0), gg = grad_of(0, 1), gc = grad_of(2.5, -1.5);
  for (std::size_t i = 0; i < gc.size(); ++i)
    CHECK(gc[i] == doctest::Approx(2.5 * gf[i] - 1.5 * gg[i]).epsilon(1e-14));
}

TEST_CASE("identical passes give bit-identical gradients") {
  auto run = [] {
    std::mt19937_64 rng(4);
    Tensor w = Tensor::leaf(3, 3, values(random_tensor(3, 3, rng)));
    std::mt19937_64 drop_rng(8);
    Tape tape;
    tape.backward(sum_all(softmax_rows(dropout(matmul(w, w), 0.3, drop_rng, true))));
    return w.grad();
  };
  CHECK(run() == run());
}

TEST_CASE("softmax family is normalized and non-negative") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor y = softmax_rows(random_tensor(4, 9, rng, 30.0));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        CHECK(y.at(r, c) >= 0.0);
        s += y.at(r, c);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("masked softmax gives zero rows when nothing is allowed") {
  const Tensor y = masked_softmax_rows(Tensor::from(2, 2, {1, 2, 3, 4}), {0, 0, 1, 0});
  CHECK(values(y) == std::vector<double>{0, 0, 1, 0});
}

TEST_CASE("segment ops") {
  const Tensor x = Tensor::from(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(values(segment_sum(x, {0, 1, 0}, 2)) == std::vector<double>{6, 8, 3, 4});
  CHECK(values(segment_mean(x, {0, 0, 0}, 2)) == std::vector<double>{3, 4, 0, 0});
  const Tensor s = segment_softmax(Tensor::from(3, 1, {0, 5, 0}), {0, 1, 0}, 2);
  CHECK(values(s) == std::vector<double>{0.5, 1.0, 0.5});
}

TEST_CASE("set_matmul matches matmul and ignores term order") {
  std::mt19937_64 rng(17);
  const Tensor a = random_tensor(3, 5, rng);
  const Tensor b = random_tensor(5, 4, rng);
  const auto plain = values(matmul(a, b));
  const auto set = values(set_matmul(a, b));
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(set[i] == doctest::Approx(plain[i]).epsilon(1e-13));

  // Reversing the inner index changes nothing.
  std::vector<std::size_t> rev{4, 3, 2, 1, 0};
  const Tensor ar = transpose(embedding_lookup(transpose(a), rev));
  const Tensor br = embedding_lookup(b, rev);
  CHECK(values(set_matmul(ar, br)) == set);
}

TEST_CASE("dropout is the identity at inference and unbiased in training") {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::constant(1, 20000, 1.0);
  CHECK(values(dropout(x, 0.3, rng, false)) == values(x));
  const Tensor y = dropout(x, 0.3, rng, true);
  const auto v = values(y);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
  for (double e : v) CHECK((e == 0.0 || std::abs(e - 1.0 / 0.7) < 1e-15));
  CHECK_THROWS_AS(dropout(x, 1.0, rng, true), ContractError);
}

TEST_CASE("debug checks reject non-finite results") {
  const bool saved = debug_checks();
  set_debug_checks(true);
  CHECK_THROWS_AS(log(Tensor::scalar(0.0)), NumericError);
  set_debug_checks(false);
  CHECK(std::isinf(log(Tensor::scalar(0.0)).item()));
  set_debug_checks(saved);
}

TEST_CASE("parameters start in [-0.1, 0.1] and snapshots restore") {
  std::mt19937_64 rng(2);
  ParamStore store;
  Tensor w = store.add("w", 10, 10, rng);
  for (double v : w.data()) CHECK(std::abs(v) <= 0.1);
  CHECK_THROWS_AS(store.add("w", 1, 1, rng), ContractError);
  const auto snap = store.snapshot();
  w.mutable_data()[0] = 42.0;
  store.restore(snap);
  CHECK(w.data()[0] == snap.at("w")[0]);
}
