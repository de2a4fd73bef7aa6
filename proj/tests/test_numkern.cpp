#include <cmath>

#include "doctest.h"
#include "driftlab/graph.hpp"
#include "driftlab/numkern.hpp"
#include "driftlab/rng.hpp"

using namespace driftlab;

namespace {
Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (double& v : t.vec()) v = rng.gaussian();
  return t;
}
}  // namespace

TEST_CASE("matmul identity and annihilator") {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor r = matmul(Tensor::identity(2), a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == a[i]);

  Tensor p = Tensor::matrix(2, 2, {1, 0, 0, 0});
  Tensor q = Tensor::matrix(2, 1, {0, 5});
  Tensor z = matmul(p, q);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("matmul hand arithmetic") {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::matrix(2, 1, {5, 6});
  Tensor r = matmul(a, b);
  CHECK(r[0] == 17.0);
  CHECK(r[1] == 39.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a({2, 3});
  Tensor b({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
}

TEST_CASE("matmul associativity") {
  Rng rng(17);
  Tensor a = random_matrix(3, 4, rng);
  Tensor b = random_matrix(4, 5, rng);
  Tensor c = random_matrix(5, 2, rng);
  Tensor lhs = matmul(matmul(a, b), c);
  Tensor rhs = matmul(a, matmul(b, c));
  for (std::size_t i = 0; i < lhs.size(); ++i)
    CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-10 * std::max(1.0, std::abs(rhs[i])));
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transpose") {
  Rng rng(18);
  Tensor a = random_matrix(3, 4, rng);
  Tensor b = random_matrix(5, 4, rng);
  Tensor bt({4, 5});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) bt.at(j, i) = b.at(i, j);
  Tensor r1 = matmul_nt(a, b);
  Tensor r2 = matmul(a, bt);
  for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == doctest::Approx(r2[i]).epsilon(1e-12));

  Tensor c = random_matrix(4, 3, rng);
  Tensor d = random_matrix(4, 2, rng);
  Tensor ct({3, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) ct.at(j, i) = c.at(i, j);
  Tensor r3 = matmul_tn(c, d);
  Tensor r4 = matmul(ct, d);
  for (std::size_t i = 0; i < r3.size(); ++i) CHECK(r3[i] == doctest::Approx(r4[i]).epsilon(1e-12));
}

TEST_CASE("softmax_rows closed forms") {
  Tensor r1 = softmax_rows(Tensor::row({0, 0}));
  CHECK(r1[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r1[1] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor r2 = softmax_rows(Tensor::row({1000, 1000}));
  CHECK(r2[0] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor r3 = softmax_rows(Tensor::row({std::log(1.0), std::log(3.0)}));
  CHECK(r3[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r3[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_rows rows sum to one and shift-invariant") {
  Rng rng(19);
  Tensor x = random_matrix(6, 7, rng);
  Tensor y = softmax_rows(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(y.at(r, c) >= 0.0);
      s += y.at(r, c);
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  Tensor shifted = x;
  for (std::size_t c = 0; c < 7; ++c) shifted.at(2, c) += 13.5;
  Tensor ys = softmax_rows(shifted);
  for (std::size_t c = 0; c < 7; ++c) CHECK(std::abs(ys.at(2, c) - y.at(2, c)) <= 1e-12);
}

TEST_CASE("l2_normalize_rows closed forms") {
  Tensor r = l2_normalize_rows(Tensor::row({3, 4}));
  CHECK(r[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(0.8).epsilon(1e-12));

  Tensor z = l2_normalize_rows(Tensor::row({0, 0}), 1e-8);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);

  Tensor h = l2_normalize_rows(Tensor::row({1, 1}));
  CHECK(h[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("l2_normalize_rows idempotent") {
  Rng rng(20);
  Tensor x = random_matrix(5, 4, rng);
  Tensor once = l2_normalize_rows(x);
  Tensor twice = l2_normalize_rows(once);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(once[i] - twice[i]) <= 1e-12);
}

TEST_CASE("grad_check quadratic is near exact") {
  Tensor x = Tensor::row({1, 2});
  auto f = [](const Tensor& t) { return t[0] * t[0] + t[1] * t[1]; };
  Tensor g = Tensor::row({2, 4});
  CHECK(grad_check(f, x, g, 1e-5) < 1e-8);
}

TEST_CASE("grad_check softmax-then-dot") {
  Rng rng(21);
  Tensor x = random_matrix(1, 5, rng);
  Tensor w = random_matrix(1, 5, rng);
  Tape tape;
  NodeId xn = tape.input(x);
  NodeId y = tape.softmax_rows(xn);
  // dot with a fixed vector via elementwise trick: sum(softmax(x) .* w)
  // expressed as matmul_nt(y, w) -> [1 x 1].
  NodeId loss = tape.sum(tape.matmul_nt(y, tape.constant(w)));
  tape.backward(loss);
  auto f = [&](const Tensor& t) {
    Tensor s = softmax_rows(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < 5; ++i) acc += s[i] * w[i];
    return acc;
  };
  CHECK(grad_check(f, x, tape.grad(xn), 1e-5) < 1e-6);
}

TEST_CASE("grad_check contract errors") {
  Tensor x = Tensor::row({1.0});
  Tensor g = Tensor::row({1.0});
  auto f = [](const Tensor& t) { return t[0]; };
  CHECK_THROWS_AS(grad_check(f, x, g, 1e-8), ContractError);
  CHECK_THROWS_AS(grad_check(f, x, Tensor::row({1.0, 2.0}), 1e-5), DimensionError);
}

TEST_CASE("per-kernel gradients match finite differences") {
  // 10 seeds per op, shapes <= 8x8, tolerance 1e-6.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(300 + seed);
    const std::size_t m = 2 + rng.next_below(6);
    const std::size_t k = 2 + rng.next_below(6);
    const std::size_t n = 2 + rng.next_below(6);
    Tensor a0 = random_matrix(m, k, rng);
    Tensor b0 = random_matrix(k, n, rng);

    auto check_unary = [&](auto&& op, auto&& val, Tensor x0) {
      Tape tape;
      NodeId x = tape.input(x0);
      NodeId loss = tape.sum_squares(op(tape, x));
      tape.backward(loss);
      auto f = [&](const Tensor& t) {
        Tensor y = val(t);
        double s = 0.0;
        for (double v : y.vec()) s += v * v;
        return s;
      };
      CHECK(grad_check(f, x0, tape.grad(x), 1e-5) < 1e-6);
    };

    check_unary([](Tape& t, NodeId x) { return t.relu(x); },
                [](const Tensor& t) {
                  Tensor x = t;  // keep clear of the kink
                  return relu(x);
                },
                [&] {
                  Tensor x = random_matrix(m, n, rng);
                  for (double& v : x.vec())
                    if (std::abs(v) < 0.05) v = v < 0 ? -0.1 : 0.1;
                  return x;
                }());
    check_unary([](Tape& t, NodeId x) { return t.softmax_rows(x); },
                [](const Tensor& t) { return softmax_rows(t); }, random_matrix(m, n, rng));
    check_unary([](Tape& t, NodeId x) { return t.l2_normalize_rows(x); },
                [](const Tensor& t) { return l2_normalize_rows(t); }, random_matrix(m, n, rng));
    check_unary([](Tape& t, NodeId x) { return t.scale(x, 1.7); },
                [](const Tensor& t) { return scale(t, 1.7); }, random_matrix(m, n, rng));

    // binary ops, gradient w.r.t. each operand
    {
      Tape tape;
      NodeId a = tape.input(a0);
      NodeId loss = tape.sum_squares(tape.matmul(a, tape.constant(b0)));
      tape.backward(loss);
      auto f = [&](const Tensor& t) {
        Tensor y = matmul(t, b0);
        double s = 0.0;
        for (double v : y.vec()) s += v * v;
        return s;
      };
      CHECK(grad_check(f, a0, tape.grad(a), 1e-5) < 1e-6);
    }
    {
      Tape tape;
      NodeId b = tape.input(b0);
      NodeId loss = tape.sum_squares(tape.matmul(tape.constant(a0), b));
      tape.backward(loss);
      auto f = [&](const Tensor& t) {
        Tensor y = matmul(a0, t);
        double s = 0.0;
        for (double v : y.vec()) s += v * v;
        return s;
      };
      CHECK(grad_check(f, b0, tape.grad(b), 1e-5) < 1e-6);
    }
    {
      Tensor bias0 = random_matrix(1, k, rng);
      Tape tape;
      NodeId bias = tape.input(bias0);
      NodeId loss = tape.sum_squares(tape.add_rowvec(tape.constant(a0), bias));
      tape.backward(loss);
      auto f = [&](const Tensor& t) {
        Tensor y = add_rowvec(a0, t);
        double s = 0.0;
        for (double v : y.vec()) s += v * v;
        return s;
      };
      CHECK(grad_check(f, bias0, tape.grad(bias), 1e-5) < 1e-6);
    }
  }
}

TEST_CASE("nce_diag gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(800 + seed);
    const std::size_t W = 2 + rng.next_below(5);
    Tensor s0 = random_matrix(W, W, rng);
    Tape tape;
    NodeId s = tape.input(s0);
    NodeId loss = tape.nce_diag(s, 0.2);
    tape.backward(loss);
    auto f = [&](const Tensor& t) {
      Tape t2;
      return t2.scalar_value(t2.nce_diag(t2.constant(t), 0.2));
    };
    CHECK(grad_check(f, s0, tape.grad(s), 1e-5) < 1e-6);
  }
}

TEST_CASE("tensor rejects non-finite inputs on the tape") {
  Tensor bad = Tensor::row({1.0, std::nan("")});
  Tape tape;
  CHECK_THROWS_AS(tape.input(bad), ContractError);
}
