#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "pmp/autodiff.hpp"
#include "pmp/gradcheck.hpp"
#include "pmp/tensor.hpp"

using namespace pmp;

TEST_CASE("tensor construction and accessors") {
  Tensor t({2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

  Tensor m({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(m.at(0, 1) == 2.0);
  CHECK(m.at(1, 0) == 3.0);
  m.at(1, 1) = 9.0;
  CHECK(m[3] == 9.0);

  CHECK(Tensor::scalar(5.0).numel() == 1);
  CHECK(Tensor::scalar(5.0)[0] == 5.0);
  CHECK(Tensor::full({3}, 2.5)[2] == 2.5);
  CHECK(Tensor({2, 2}, {1, 2, 3, 4}).same_shape(m));
  CHECK_FALSE(Tensor({4}).same_shape(m));
}

TEST_CASE("tensor shape/value mismatches throw") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  Tensor v({4});
  CHECK_THROWS_AS((void)v.rows(), std::logic_error);
  CHECK_THROWS_AS((void)v.at(0, 0), std::logic_error);
}

TEST_CASE("all_finite flags nan and inf") {
  Tensor t({3}, {1.0, 2.0, 3.0});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  t[1] = 2.0;
  t[2] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("matmul against hand result") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {5, 6});
  Tensor c = matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 1);
  CHECK(c[0] == 17.0);
  CHECK(c[1] == 39.0);
  CHECK_THROWS_AS(matmul(a, Tensor({3, 1})), std::invalid_argument);
}

TEST_CASE("matmul zero-skip path matches dense accumulation") {
  // the kernel skips a-entries that are exactly zero; the result must agree
  // with the naive triple loop including signed zeros
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor a({5, 7}), b({7, 4});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = (i % 3 == 0) ? 0.0 : u(rng);
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = u(rng);
  Tensor got = matmul(a, b);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(got.at(i, j) == doctest::Approx(acc).epsilon(1e-15));
    }
}

TEST_CASE("transpose and relu kernels") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor at = transposed(a);
  CHECK(at.rows() == 3);
  CHECK(at.at(2, 1) == 6.0);
  CHECK(at.at(0, 1) == 4.0);

  Tensor r = relu(Tensor({4}, {-2.0, -0.0, 0.7, 1.5}));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 0.7);
  CHECK(r[3] == 1.5);
}

TEST_CASE("graph add/mul require matching shapes or scalar operand") {
  Graph g;
  Var a = g.param(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = g.param(Tensor({3}, {1, 2, 3}));
  CHECK_THROWS_AS(g.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(g.mul(a, b), std::invalid_argument);

  Var s = g.param(Tensor::scalar(10.0));
  Tensor sum = g.value(g.add(a, s));
  CHECK(sum[3] == 14.0);
  Tensor prod = g.value(g.mul(s, a));
  CHECK(prod[2] == 30.0);
}

TEST_CASE("scalar broadcast gradients accumulate over the broadcast side") {
  // d/ds sum(s * a) = sum(a); d/da_i = s
  Graph g;
  Var a = g.param(Tensor({3}, {1.0, 2.0, 3.0}));
  Var s = g.param(Tensor::scalar(2.0));
  Var loss = g.sum(g.mul(s, a));
  g.backward(loss);
  CHECK(g.grad(s)[0] == doctest::Approx(6.0));
  for (int i = 0; i < 3; ++i) CHECK(g.grad(a)[i] == doctest::Approx(2.0));
}

TEST_CASE("relu gradient mask") {
  Graph g;
  Var x = g.param(Tensor({4}, {-2.0, -0.5, 0.7, 1.5}));
  g.backward(g.sum(g.relu(x)));
  Tensor gx = g.grad(x);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 1.0);
  CHECK(gx[3] == 1.0);
}

TEST_CASE("shared subexpression accumulates both paths") {
  // f(x) = x^2 + x^2 at x = 3 -> df/dx = 4x = 12 exactly
  Graph g;
  Var x = g.param(Tensor::scalar(3.0));
  Var sq = g.square(x);
  g.backward(g.add(sq, sq));
  CHECK(g.grad(x)[0] == 12.0);
}

TEST_CASE("log rejects non-positive input and exp/log invert") {
  Graph g;
  CHECK_THROWS_AS(g.log(g.param(Tensor({2}, {1.0, 0.0}))), std::domain_error);
  CHECK_THROWS_AS(g.log(g.param(Tensor({1}, {-3.0}))), std::domain_error);
  Var x = g.param(Tensor({2}, {0.3, 2.0}));
  Tensor back = g.value(g.log(g.exp(x)));
  CHECK(back[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(back[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("backward requires a single-element root") {
  Graph g;
  Var x = g.param(Tensor({3}, {1, 2, 3}));
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("grad of a node the root does not depend on is zero") {
  Graph g;
  Var used = g.param(Tensor::scalar(2.0));
  Var unused = g.param(Tensor({2}, {5.0, 6.0}));
  g.backward(g.square(used));
  Tensor gz = g.grad(unused);
  CHECK(gz[0] == 0.0);
  CHECK(gz[1] == 0.0);
  CHECK(g.grad(used)[0] == 4.0);
}

TEST_CASE("constants do not receive gradients") {
  Graph g;
  Var c = g.constant(Tensor({2}, {1.0, 4.0}));
  Var x = g.param(Tensor({2}, {2.0, 3.0}));
  g.backward(g.sum(g.mul(c, x)));
  CHECK(g.grad(x)[0] == 1.0);
  CHECK(g.grad(x)[1] == 4.0);
  CHECK(g.grad(c)[0] == 0.0);
}

TEST_CASE("matmul gradients match hand formulas") {
  // L = sum(A B): dL/dA = 1 B^T, dL/dB = A^T 1
  Graph g;
  Tensor ta({2, 3}, {1, -2, 3, 0.5, 4, -1});
  Tensor tb({3, 2}, {2, 1, -1, 0.5, 3, -2});
  Var a = g.param(ta);
  Var b = g.param(tb);
  g.backward(g.sum(g.matmul(a, b)));
  Tensor ga = g.grad(a), gb = g.grad(b);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double want = tb.at(k, 0) + tb.at(k, 1);
      CHECK(ga.at(i, k) == doctest::Approx(want).epsilon(1e-15));
    }
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 2; ++j) {
      double want = ta.at(0, k) + ta.at(1, k);
      CHECK(gb.at(k, j) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("reshape and transpose round gradients back to source layout") {
  Graph g;
  Tensor ta({2, 3}, {1, 2, 3, 4, 5, 6});
  Var a = g.param(ta);
  Var w = g.param(Tensor({6, 1}, {1, 2, 3, 4, 5, 6}));
  Var flat = g.reshape(g.transpose(a), {1, 6});  // column-major flatten of a
  g.backward(g.sum(g.matmul(flat, w)));
  // flat = (a00, a10, a01, a11, a02, a12) so grad of a follows that order
  Tensor ga = g.grad(a);
  CHECK(ga.at(0, 0) == 1.0);
  CHECK(ga.at(1, 0) == 2.0);
  CHECK(ga.at(0, 1) == 3.0);
  CHECK(ga.at(1, 1) == 4.0);
  CHECK(ga.at(0, 2) == 5.0);
  CHECK(ga.at(1, 2) == 6.0);
  CHECK_THROWS_AS(g.reshape(a, {4}), std::invalid_argument);
}

TEST_CASE("composite expression passes a central-difference check") {
  // smooth composite (no relu) so the finite-difference reference is clean
  auto f = [](Graph& g, const std::vector<Var>& p) {
    Var m = g.matmul(p[0], p[1]);
    Var e = g.exp(g.mul_scalar(m, 0.3));
    Var q = g.square(g.add(m, p[2]));
    return g.sum(g.add(e, g.mul(q, q)));
  };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  Tensor a({3, 4}), b({4, 2}), c({3, 2});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = u(rng);
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = u(rng);
  for (std::size_t i = 0; i < c.numel(); ++i) c[i] = u(rng);
  double err = grad_check(f, {a, b, c}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("neg, add_scalar and square values") {
  Graph g;
  Var x = g.param(Tensor({2}, {1.5, -2.0}));
  CHECK(g.value(g.neg(x))[1] == 2.0);
  CHECK(g.value(g.add_scalar(x, 0.5))[0] == 2.0);
  CHECK(g.value(g.square(x))[1] == 4.0);
  g.backward(g.sum(g.square(x)));
  CHECK(g.grad(x)[0] == 3.0);
  CHECK(g.grad(x)[1] == -4.0);
}

TEST_CASE("make_node runs the supplied backward rule") {
  Graph g;
  Var x = g.param(Tensor({2}, {2.0, 5.0}));
  // y = 3x with a hand-written pullback
  Tensor y({2}, {6.0, 15.0});
  Var node = g.make_node(
      y, {x},
      [](const Tensor&, const Tensor& og, const std::vector<const Tensor*>&,
         const std::vector<Tensor*>& in_grads) {
        if (in_grads[0] == nullptr) return;
        for (std::size_t i = 0; i < og.numel(); ++i) (*in_grads[0])[i] += 3.0 * og[i];
      });
  g.backward(g.sum(node));
  CHECK(g.grad(x)[0] == 3.0);
  CHECK(g.grad(x)[1] == 3.0);
}

TEST_CASE("second backward on a fresh graph is independent") {
  // graphs are built per batch in training; values must not leak across
  for (int trial = 0; trial < 2; ++trial) {
    Graph g;
    Var x = g.param(Tensor::scalar(4.0));
    g.backward(g.square(x));
    CHECK(g.grad(x)[0] == 8.0);
  }
}
