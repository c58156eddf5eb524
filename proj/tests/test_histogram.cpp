#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "pmp/autodiff.hpp"
#include "pmp/distributions.hpp"
#include "pmp/gradcheck.hpp"
#include "pmp/histogram.hpp"
#include "pmp/tensor.hpp"

using namespace pmp;

namespace {

SoftHistogram fabricated(Graph& g, const BinGrid& grid, const std::vector<double>& probs) {
  // hand-built mass node; lets KLD be tested against exact probabilities
  return SoftHistogram{grid, g.param(Tensor({probs.size()}, probs))};
}

}  // namespace

TEST_CASE("make_grid lays out centers and kernel widths") {
  BinGrid g2 = make_grid(-1.0, 1.0, 2);
  REQUIRE(g2.centers.size() == 2);
  CHECK(g2.centers[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(g2.centers[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g2.widths[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g2.spacing() == doctest::Approx(1.0).epsilon(1e-15));

  BinGrid g100 = make_grid(-1.0, 1.0, 100);
  REQUIRE(g100.centers.size() == 100);
  CHECK(g100.centers.front() == doctest::Approx(-0.99).epsilon(1e-12));
  CHECK(g100.centers.back() == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(g100.spacing() == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(g100.widths[50] == doctest::Approx(0.01).epsilon(1e-12));

  CHECK_THROWS_AS(make_grid(1.0, -1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(-1.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("grid validation") {
  BinGrid g = make_grid(0.0, 1.0, 4);
  g.validate();
  BinGrid uneven = g;
  uneven.centers[2] += 0.05;
  CHECK_THROWS_AS(uneven.validate(), std::invalid_argument);
  BinGrid bad_width = g;
  bad_width.widths[1] = 0.0;
  CHECK_THROWS_AS(bad_width.validate(), std::invalid_argument);
  BinGrid short_grid;
  short_grid.centers = {0.5};
  short_grid.widths = {0.1};
  CHECK_THROWS_AS(short_grid.validate(), std::invalid_argument);
}

TEST_CASE("soft histogram mass is normalized") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  Tensor a({300}), b({211});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = u(rng);
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = u(rng);
  BinGrid grid = make_grid(-1.0, 1.0, 100);
  std::vector<double> q = soft_histogram_eval({&a, &b}, grid);
  double total = 0.0;
  for (double m : q) {
    CHECK(m >= 0.0);
    total += m;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single weight on a center splits mass by the gaussian kernel") {
  // weight exactly on center 0 of a 2-bin grid: neighbor gets e^{-(h/beta)^2}
  // = e^{-4} of the peak before normalization
  BinGrid grid = make_grid(-1.0, 1.0, 2);
  Tensor w({1}, {-0.5});
  std::vector<double> q = soft_histogram_eval({&w}, grid);
  const double r = std::exp(-4.0);  // 0.01831563888873418
  CHECK(q[0] == doctest::Approx(1.0 / (1.0 + r)).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(r / (1.0 + r)).epsilon(1e-14));
}

TEST_CASE("symmetric weights produce a symmetric histogram") {
  Tensor w({6}, {-0.8, -0.45, -0.1, 0.1, 0.45, 0.8});
  BinGrid grid = make_grid(-1.0, 1.0, 10);
  std::vector<double> q = soft_histogram_eval({&w}, grid);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(q[k] == doctest::Approx(q[9 - k]).epsilon(1e-12));
}

TEST_CASE("entries far outside the grid fall back to the nearest bin") {
  BinGrid grid = make_grid(-1.0, 1.0, 10);
  Tensor inside({1}, {0.0});
  Tensor outlier({1}, {50.0});
  // window misses every center, so the outlier touches only the last bin,
  // with a kernel value that underflows to zero
  std::vector<double> q = soft_histogram_eval({&inside, &outlier}, grid);
  double total = 0.0;
  for (double m : q) total += m;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // and a histogram of only outliers cannot be normalized
  CHECK_THROWS_AS(soft_histogram_eval({&outlier}, grid), std::runtime_error);
}

TEST_CASE("shrinking over-smoothed kernels recovers the hard histogram") {
  // beta ten times the default blurs the counts badly; scaling those widths
  // by 0.1 lands on the half-spacing default, which tracks the hard counts.
  // Shrinking *below* the default helps nothing: with kernels much narrower
  // than a bin, entries are re-weighted by exp(-(d/beta)^2) of their center
  // distance d instead of being counted, so the L1 gap grows again.
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor w({1000});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = u(rng);
  BinGrid grid = make_grid(-1.0, 1.0, 10);
  BinGrid smooth = grid;
  for (double& b : smooth.widths) b *= 10.0;
  auto l1_to_hard = [&](const BinGrid& bg) {
    std::vector<double> soft = soft_histogram_eval({&w}, bg);
    std::vector<double> hard = hard_histogram({&w}, grid);
    double l1 = 0.0;
    for (std::size_t k = 0; k < soft.size(); ++k) l1 += std::abs(soft[k] - hard[k]);
    return l1;
  };
  BinGrid shrunk = smooth;
  for (double& b : shrunk.widths) b *= 0.1;  // back to the default width
  double before = l1_to_hard(smooth);
  double after = l1_to_hard(shrunk);
  CHECK(after < 0.05);
  CHECK(after < before);

  BinGrid too_narrow = grid;
  for (double& b : too_narrow.widths) b *= 0.1;
  CHECK(l1_to_hard(too_narrow) > after);
}

TEST_CASE("hard histogram counts nearest centers") {
  BinGrid grid = make_grid(-1.0, 1.0, 4);  // centers -0.75 -0.25 0.25 0.75
  Tensor w({5}, {-0.9, -0.3, 0.2, 0.3, 2.0});
  std::vector<double> q = hard_histogram({&w}, grid);
  CHECK(q[0] == doctest::Approx(0.2));
  CHECK(q[1] == doctest::Approx(0.2));
  CHECK(q[2] == doctest::Approx(0.4));
  CHECK(q[3] == doctest::Approx(0.2));  // 2.0 clamps to the last bin
}

TEST_CASE("graph histogram value equals the graph-free evaluation") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor a({17}), b({5});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = u(rng);
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = u(rng);
  BinGrid grid = make_grid(-1.0, 1.0, 16);
  std::vector<double> plain = soft_histogram_eval({&a, &b}, grid);
  Graph g;
  SoftHistogram sh = soft_histogram(g, {g.param(a), g.param(b)}, grid);
  const Tensor& mass = g.value(sh.mass);
  REQUIRE(mass.numel() == plain.size());
  for (std::size_t k = 0; k < plain.size(); ++k) CHECK(mass[k] == plain[k]);
}

TEST_CASE("kld of a law against itself is zero") {
  TargetDistribution target = TargetDistribution::gaussian(0.0, 0.3, -1.0, 1.0);
  BinGrid grid = make_grid(-1.0, 1.0, 100);
  DiscreteLaw p = discretize(target, grid.centers);
  Graph g;
  Var d = kld(g, p, fabricated(g, grid, p.probs));
  CHECK(std::abs(g.value(d)[0]) < 1e-12);
}

TEST_CASE("kld against a hand-computed value and gradient") {
  // D((.5,.5) || (.75,.25)) = 0.5 ln(4/3) and dD/dq_k = -p_k/q_k
  BinGrid grid = make_grid(-1.0, 1.0, 2);
  DiscreteLaw p{grid.centers, {0.5, 0.5}};
  Graph g;
  SoftHistogram q = fabricated(g, grid, {0.75, 0.25});
  Var d = kld(g, p, q);
  CHECK(g.value(d)[0] == doctest::Approx(0.14384103622589042).epsilon(1e-14));
  g.backward(d);
  Tensor gq = g.grad(q.mass);
  CHECK(gq[0] == doctest::Approx(-0.5 / 0.75).epsilon(1e-14));
  CHECK(gq[1] == doctest::Approx(-0.5 / 0.25).epsilon(1e-14));
}

TEST_CASE("kld is non-negative over random mass pairs") {
  std::mt19937_64 rng(77);
  std::exponential_distribution<double> ex(1.0);
  BinGrid grid = make_grid(-1.0, 1.0, 12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(12), q(12);
    double sp = 0.0, sq = 0.0;
    for (int k = 0; k < 12; ++k) {
      p[k] = ex(rng) + 1e-6;
      q[k] = ex(rng) + 1e-6;
      sp += p[k];
      sq += q[k];
    }
    for (int k = 0; k < 12; ++k) {
      p[k] /= sp;
      q[k] /= sq;
    }
    Graph g;
    DiscreteLaw law{grid.centers, p};
    Var d = kld(g, law, fabricated(g, grid, q));
    CHECK(g.value(d)[0] >= -1e-12);
  }
}

TEST_CASE("kld floors vanishing q mass instead of diverging") {
  BinGrid grid = make_grid(-1.0, 1.0, 2);
  DiscreteLaw p{grid.centers, {0.5, 0.5}};
  Graph g;
  SoftHistogram q = fabricated(g, grid, {1.0 - 1e-12, 1e-12});
  Var d = kld(g, p, q);
  double want = 0.5 * (std::log(0.5) - std::log(1.0 - 1e-12)) +
                0.5 * (std::log(0.5) - std::log(kKldMassFloor));
  CHECK(g.value(d)[0] == doctest::Approx(want).epsilon(1e-12));
  g.backward(d);
  // the floored bin is flat, so only the live bin pulls
  CHECK(g.grad(q.mass)[1] == 0.0);
  CHECK(g.grad(q.mass)[0] == doctest::Approx(-0.5 / (1.0 - 1e-12)).epsilon(1e-12));
}

TEST_CASE("kld rejects mismatched grids") {
  BinGrid g2 = make_grid(-1.0, 1.0, 2);
  BinGrid g4 = make_grid(-1.0, 1.0, 4);
  DiscreteLaw p{g4.centers, {0.25, 0.25, 0.25, 0.25}};
  Graph g;
  SoftHistogram q = fabricated(g, g2, {0.5, 0.5});
  CHECK_THROWS_AS(kld(g, p, q), std::invalid_argument);
  DiscreteLaw shifted{{-0.4, 0.6}, {0.5, 0.5}};
  CHECK_THROWS_AS(kld(g, shifted, q), std::invalid_argument);
}

TEST_CASE("histogram backward matches finite differences through kld") {
  TargetDistribution target = TargetDistribution::gaussian(0.0, 0.3, -1.0, 1.0);
  BinGrid grid = make_grid(-1.0, 1.0, 8);
  DiscreteLaw p = discretize(target, grid.centers);
  auto f = [&](Graph& g, const std::vector<Var>& params) {
    SoftHistogram q = soft_histogram(g, params, grid);
    return kld(g, p, q);
  };
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  Tensor w1({6}), w2({3, 2});
  for (std::size_t i = 0; i < w1.numel(); ++i) w1[i] = u(rng);
  for (std::size_t i = 0; i < w2.numel(); ++i) w2[i] = u(rng);
  CHECK(grad_check(f, {w1, w2}, 1e-6) < 1e-6);
}

TEST_CASE("histogram gradient sums to zero across bins") {
  // mass is normalized, so a uniform upstream gradient cancels exactly:
  // sum_k dL/dm_k = (sum g_k - K * dot) ... for g = 1 the latent gradient
  // must vanish since sum_k y_k == 1 is constant
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  Tensor w({40});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = u(rng);
  BinGrid grid = make_grid(-1.0, 1.0, 10);
  Graph g;
  Var latent = g.param(w);
  SoftHistogram q = soft_histogram(g, {latent}, grid);
  g.backward(g.sum(q.mass));
  Tensor gw = g.grad(latent);
  for (std::size_t i = 0; i < gw.numel(); ++i) CHECK(std::abs(gw[i]) < 1e-14);
}
