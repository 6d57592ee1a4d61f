#include <doctest.h>

#include "taskvec/rng.hpp"
#include "taskvec/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace taskvec;

namespace {

// Central finite difference of a scalar-valued function at x[i].
double fd(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
          std::size_t i, double h = 1e-6) {
  x[i] += h;
  const double up = f(x);
  x[i] -= 2 * h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("matmul forward and gradient") {
  Tape tape;
  auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12}, true);
  auto c = tape.matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.at(0, 0) == doctest::Approx(58).epsilon(1e-12));
  CHECK(c.at(1, 1) == doctest::Approx(154).epsilon(1e-12));

  tape.backward(tape.sum(c));
  // d(sum AB)/dA = 1 B^T: row i gets column sums of B.
  CHECK(a.grad()[0] == doctest::Approx(15).epsilon(1e-12));
  CHECK(a.grad()[1] == doctest::Approx(19).epsilon(1e-12));
  CHECK(b.grad()[0] == doctest::Approx(5).epsilon(1e-12));

  CHECK_THROWS_AS((void)tape.matmul(a, a), DimensionError);
}

TEST_CASE("broadcast add follows trailing-suffix rule") {
  Tape tape;
  auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto row = Tensor::from({3}, {10, 20, 30}, true);
  auto c = tape.add(a, row);
  CHECK(c.at(0, 0) == 11);
  CHECK(c.at(1, 2) == 36);

  tape.backward(tape.sum(c));
  CHECK(row.grad()[0] == doctest::Approx(2).epsilon(1e-12));  // broadcast over 2 rows

  auto bad = Tensor::from({2}, {1, 2});
  CHECK_THROWS_AS((void)tape.add(a, bad), DimensionError);
}

TEST_CASE("softmax rows sum to one and log_softmax agrees") {
  Tape tape;
  auto a = Tensor::from({2, 4}, {0.5, -1, 2, 0, 3, 3, 3, 3});
  auto s = tape.softmax(a);
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 4; ++c) sum += s.at(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(s.at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));

  auto ls = tape.log_softmax(a);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(ls.at(i) == doctest::Approx(std::log(s.at(i))).epsilon(1e-9));
  }
}

TEST_CASE("layer_norm normalizes with population variance") {
  Tape tape;
  auto a = Tensor::from({1, 4}, {1, 2, 3, 4});
  auto g = Tensor::full({4}, 1.0);
  auto b = Tensor::zeros({4});
  auto out = tape.layer_norm(a, g, b);
  // mean 2.5, population variance 1.25.
  const double denom = std::sqrt(1.25 + 1e-5);
  CHECK(out.at(0, 0) == doctest::Approx(-1.5 / denom).epsilon(1e-12));
  CHECK(out.at(0, 3) == doctest::Approx(1.5 / denom).epsilon(1e-12));
}

TEST_CASE("embedding backward scatter-adds repeated ids") {
  Tape tape;
  auto table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  auto rows = tape.embedding(table, {1, 1, 0});
  CHECK(rows.at(0, 0) == 3);
  tape.backward(tape.sum(rows));
  CHECK(table.grad()[2] == doctest::Approx(2.0));  // row 1 hit twice
  CHECK(table.grad()[0] == doctest::Approx(1.0));
  CHECK(table.grad()[4] == doctest::Approx(0.0));
}

TEST_CASE("pick selects per-row entries and routes gradients") {
  Tape tape;
  auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto p = tape.pick(a, {2, 0});
  CHECK(p.at(0) == 3);
  CHECK(p.at(1) == 4);
  tape.backward(tape.sum(p));
  CHECK(a.grad()[2] == 1.0);
  CHECK(a.grad()[3] == 1.0);
  CHECK(a.grad()[0] == 0.0);
  CHECK_THROWS_AS((void)tape.pick(a, {0, 5}), DimensionError);
}

TEST_CASE("slice and concat are inverses with pass-through gradients") {
  Tape tape;
  auto a = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  auto top = tape.slice_rows(a, 0, 1);
  auto rest = tape.slice_rows(a, 1, 2);
  auto back = tape.concat_rows({top, rest});
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.at(i) == a.at(i));
  tape.backward(tape.sum(back));
  for (std::size_t i = 0; i < 6; ++i) CHECK(a.grad()[i] == 1.0);
}

TEST_CASE("gradient accumulates when a tensor is used twice") {
  Tape tape;
  auto x = Tensor::from({2}, {3, 4}, true);
  auto y = tape.add(x, x);
  tape.backward(tape.sum(y));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("sqrt subgradient at zero is zero, negative input rejected") {
  Tape tape;
  auto x = Tensor::from({2}, {0.0, 4.0}, true);
  auto y = tape.sqrt(x);
  CHECK(y.at(1) == doctest::Approx(2.0));
  tape.backward(tape.sum(y));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == doctest::Approx(0.25));

  auto neg = Tensor::from({1}, {-1.0});
  CHECK_THROWS_AS((void)tape.sqrt(neg), NumericError);
}

TEST_CASE("softplus is stable at extreme logits") {
  Tape tape;
  auto x = Tensor::from({3}, {-40.0, 0.0, 40.0});
  auto y = tape.softplus(x);
  CHECK(y.at(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(y.at(1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(y.at(2) == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(std::isfinite(y.at(2)));
}

TEST_CASE("backward rejects non-scalar losses and non-recording tapes") {
  Tape tape;
  auto x = Tensor::from({2}, {1, 2}, true);
  auto y = tape.scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), ContractError);

  Tape frozen(false);
  auto z = frozen.sum(frozen.scale(x, 2.0));
  CHECK(frozen.node_count() == 0);
  CHECK_THROWS_AS(frozen.backward(z), ContractError);
}

TEST_CASE("composite expression matches finite differences") {
  // f(x) = mean(tanh(x W) * x) exercises matmul, tanh, mul, mean together.
  Rng rng(99);
  std::vector<double> w(9), x0(6);
  for (auto& v : w) v = rng.gaussian(0, 0.5);
  for (auto& v : x0) v = rng.gaussian(0, 1.0);

  auto f = [&](const std::vector<double>& xs) {
    Tape t(false);
    auto x = Tensor::from({2, 3}, xs);
    auto W = Tensor::from({3, 3}, w);
    return t.mean(t.mul(t.tanh(t.matmul(x, W)), x)).item();
  };

  Tape tape;
  auto x = Tensor::from({2, 3}, x0, true);
  auto W = Tensor::from({3, 3}, w);
  auto loss = tape.mean(tape.mul(tape.tanh(tape.matmul(x, W)), x));
  tape.backward(loss);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(fd(f, x0, i)).epsilon(1e-5));
  }
}

TEST_CASE("scale_rows multiplies each row by its factor") {
  Tape tape;
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  auto s = Tensor::from({2}, {10, 100}, true);
  auto out = tape.scale_rows(a, s);
  CHECK(out.at(0, 1) == 20);
  CHECK(out.at(1, 0) == 300);
  tape.backward(tape.sum(out));
  CHECK(s.grad()[0] == doctest::Approx(3.0));   // row sum of a's first row
  CHECK(a.grad()[3] == doctest::Approx(100.0));
}
