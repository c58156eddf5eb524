#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pmp {

enum class DistKind { Uniform, Gaussian, Laplace };

std::string to_string(DistKind k);
DistKind dist_kind_from_string(const std::string& s);

// A symmetric target law for the latent-weight distribution, together with
// the interval Omega = [omega_min, omega_max] that the histogram machinery
// discretizes it over. pdf/cdf/quantiles below always refer to the law on its
// natural (untruncated) support; only discretize() restricts to Omega.
struct TargetDistribution {
  DistKind kind = DistKind::Gaussian;
  double half_width = 1.0;  // uniform: support [-T, T]
  double mu = 0.0;          // gaussian mean
  double sigma = 1.0;       // gaussian stddev
  double loc = 0.0;         // laplace location
  double scale = 1.0;       // laplace diversity b
  double omega_min = -1.0;
  double omega_max = 1.0;

  // Factories pick Omega wide enough that the law keeps at most ~0.1% of its
  // mass outside (uniform keeps none); pass explicit bounds to override.
  static TargetDistribution uniform(double T);
  static TargetDistribution uniform(double T, double omin, double omax);
  static TargetDistribution gaussian(double mu, double sigma);
  static TargetDistribution gaussian(double mu, double sigma, double omin, double omax);
  static TargetDistribution laplace(double loc, double scale);
  static TargetDistribution laplace(double loc, double scale, double omin, double omax);

  double location() const;  // symmetry center
  void validate() const;
};

// Probability table over an ordered grid of bin centers; sums to one.
struct DiscreteLaw {
  std::vector<double> bins;
  std::vector<double> probs;
  void validate() const;
};

double pdf(const TargetDistribution& d, double w);
double cdf(const TargetDistribution& d, double w);

// Inverse of cdf: cdf(d, quantile_signed(d, r)) == r. Requires 0 < r < 1.
double quantile_signed(const TargetDistribution& d, double r);

// Magnitude threshold a >= 0 with P(|W - location| <= a) = r. Requires
// 0 <= r < 1; r = 0 gives a = 0.
double quantile_magnitude(const TargetDistribution& d, double r);

// erf(inverse_erf(x)) == x to ~1e-15; domain (-1, 1). Rational initial
// estimate polished with two Newton iterations on std::erf.
double inverse_erf(double x);

// Per-bin probabilities via CDF differences over midpoint edges, restricted
// and renormalized to the grid's extent (outer edges sit half a spacing
// beyond the first and last centers, i.e. at the Omega bounds for grids from
// make_grid). Centers must be strictly increasing, at least two of them.
DiscreteLaw discretize(const TargetDistribution& d, const std::vector<double>& centers);

// One draw from the untruncated law. Uses rejection-free standard recipes
// (normal/exponential/uniform), not the quantile functions above.
double sample(const TargetDistribution& d, std::mt19937_64& rng);

}  // namespace pmp
