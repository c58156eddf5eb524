#include "pmp/distributions.hpp"

#include <cmath>
#include <stdexcept>

namespace pmp {

namespace {

constexpr double kRootTwo = 1.4142135623730950488;
constexpr double kRootTwoPi = 2.5066282746310005024;       // sqrt(2 pi)
constexpr double kRootPiOverTwo = 0.88622692545275801365;  // sqrt(pi)/2

double rational_erfinv_estimate(double x) {
  // Chebyshev-economized rational fits in three ranges; |error| < 5e-8,
  // which two Newton steps push to machine precision.
  const double ax = std::abs(x);
  double t, num, den;
  if (ax <= 0.75) {
    static const double p[] = {-13.0959967422, 26.785225760, -9.289057365};
    static const double q[] = {-12.0749426297, 30.960614529, -17.149977991, 1.0};
    t = x * x - 0.75 * 0.75;
    num = x * (p[0] + t * (p[1] + t * p[2]));
    den = q[0] + t * (q[1] + t * (q[2] + t * q[3]));
    return num / den;
  }
  if (ax <= 0.9375) {
    static const double p[] = {-0.12402565221, 1.0688059574, -1.9594556078, 0.4230581357};
    static const double q[] = {-0.08827697997, 0.8900743359, -2.1757031196, 1.0};
    t = x * x - 0.9375 * 0.9375;
    num = x * (p[0] + t * (p[1] + t * (p[2] + t * p[3])));
    den = q[0] + t * (q[1] + t * (q[2] + t * q[3]));
    return num / den;
  }
  static const double p[] = {0.1550470003116,  1.382719649631, 0.690969348887,
                             -1.128081391617, 0.680544246825, -0.164441567910};
  static const double q[] = {0.155024849822, 1.385228141995, 1.0};
  t = 1.0 / std::sqrt(-std::log(1.0 - ax));
  num = p[0] / t + p[1] + t * (p[2] + t * (p[3] + t * (p[4] + t * p[5])));
  den = q[0] + t * (q[1] + t * q[2]);
  return (x < 0 ? -1.0 : 1.0) * num / den;
}

}  // namespace

double inverse_erf(double x) {
  if (!(x > -1.0 && x < 1.0))
    throw std::domain_error("inverse_erf: argument must lie in (-1, 1), got " +
                            std::to_string(x));
  if (x == 0.0) return 0.0;
  double y = rational_erfinv_estimate(x);
  for (int it = 0; it < 2; ++it) {
    const double err = std::erf(y) - x;
    y -= err * kRootPiOverTwo * std::exp(y * y);
  }
  return y;
}

std::string to_string(DistKind k) {
  switch (k) {
    case DistKind::Uniform: return "uniform";
    case DistKind::Gaussian: return "gaussian";
    case DistKind::Laplace: return "laplace";
  }
  throw std::invalid_argument("to_string: unknown DistKind");
}

DistKind dist_kind_from_string(const std::string& s) {
  if (s == "uniform") return DistKind::Uniform;
  if (s == "gaussian") return DistKind::Gaussian;
  if (s == "laplace") return DistKind::Laplace;
  throw std::invalid_argument("unknown distribution kind '" + s + "'");
}

TargetDistribution TargetDistribution::uniform(double T) { return uniform(T, -T, T); }

TargetDistribution TargetDistribution::uniform(double T, double omin, double omax) {
  TargetDistribution d;
  d.kind = DistKind::Uniform;
  d.half_width = T;
  d.omega_min = omin;
  d.omega_max = omax;
  d.validate();
  return d;
}

TargetDistribution TargetDistribution::gaussian(double mu, double sigma) {
  // ~0.07% of mass lies beyond 3.4 sigma
  return gaussian(mu, sigma, mu - 3.4 * sigma, mu + 3.4 * sigma);
}

TargetDistribution TargetDistribution::gaussian(double mu, double sigma, double omin,
                                                double omax) {
  TargetDistribution d;
  d.kind = DistKind::Gaussian;
  d.mu = mu;
  d.sigma = sigma;
  d.omega_min = omin;
  d.omega_max = omax;
  d.validate();
  return d;
}

TargetDistribution TargetDistribution::laplace(double loc, double scale) {
  // exp(-8) ~ 0.03% of mass beyond 8b
  return laplace(loc, scale, loc - 8.0 * scale, loc + 8.0 * scale);
}

TargetDistribution TargetDistribution::laplace(double loc, double scale, double omin,
                                               double omax) {
  TargetDistribution d;
  d.kind = DistKind::Laplace;
  d.loc = loc;
  d.scale = scale;
  d.omega_min = omin;
  d.omega_max = omax;
  d.validate();
  return d;
}

double TargetDistribution::location() const {
  switch (kind) {
    case DistKind::Uniform: return 0.0;
    case DistKind::Gaussian: return mu;
    case DistKind::Laplace: return loc;
  }
  throw std::invalid_argument("TargetDistribution: unknown kind");
}

void TargetDistribution::validate() const {
  if (!(omega_min < omega_max))
    throw std::invalid_argument("TargetDistribution: omega_min must be below omega_max");
  switch (kind) {
    case DistKind::Uniform:
      if (!(half_width > 0.0))
        throw std::invalid_argument("TargetDistribution: uniform half-width must be positive");
      break;
    case DistKind::Gaussian:
      if (!(sigma > 0.0))
        throw std::invalid_argument("TargetDistribution: gaussian sigma must be positive");
      break;
    case DistKind::Laplace:
      if (!(scale > 0.0))
        throw std::invalid_argument("TargetDistribution: laplace scale must be positive");
      break;
  }
}

void DiscreteLaw::validate() const {
  if (bins.size() != probs.size())
    throw std::invalid_argument("DiscreteLaw: bins and probs length mismatch");
  if (bins.size() < 2) throw std::invalid_argument("DiscreteLaw: need at least two bins");
  double total = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (i > 0 && !(bins[i] > bins[i - 1]))
      throw std::invalid_argument("DiscreteLaw: bin centers must be strictly increasing");
    if (probs[i] < 0.0) throw std::invalid_argument("DiscreteLaw: negative probability");
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("DiscreteLaw: probabilities sum to " + std::to_string(total));
}

double pdf(const TargetDistribution& d, double w) {
  d.validate();
  switch (d.kind) {
    case DistKind::Uniform:
      return (std::abs(w) <= d.half_width) ? 1.0 / (2.0 * d.half_width) : 0.0;
    case DistKind::Gaussian: {
      const double z = (w - d.mu) / d.sigma;
      return std::exp(-0.5 * z * z) / (d.sigma * kRootTwoPi);
    }
    case DistKind::Laplace:
      return std::exp(-std::abs(w - d.loc) / d.scale) / (2.0 * d.scale);
  }
  throw std::invalid_argument("pdf: unknown kind");
}

double cdf(const TargetDistribution& d, double w) {
  d.validate();
  switch (d.kind) {
    case DistKind::Uniform:
      if (w < -d.half_width) return 0.0;
      if (w > d.half_width) return 1.0;
      return (w + d.half_width) / (2.0 * d.half_width);
    case DistKind::Gaussian:
      return 0.5 * (1.0 + std::erf((w - d.mu) / (d.sigma * kRootTwo)));
    case DistKind::Laplace:
      if (w < d.loc) return 0.5 * std::exp((w - d.loc) / d.scale);
      return 1.0 - 0.5 * std::exp(-(w - d.loc) / d.scale);
  }
  throw std::invalid_argument("cdf: unknown kind");
}

double quantile_signed(const TargetDistribution& d, double r) {
  d.validate();
  if (!(r > 0.0 && r < 1.0))
    throw std::domain_error("quantile_signed: r must lie in (0, 1), got " + std::to_string(r));
  switch (d.kind) {
    case DistKind::Uniform:
      return -d.half_width + 2.0 * r * d.half_width;
    case DistKind::Gaussian:
      return d.mu + d.sigma * kRootTwo * inverse_erf(2.0 * r - 1.0);
    case DistKind::Laplace:
      if (r <= 0.5) return d.loc + d.scale * std::log(2.0 * r);
      return d.loc - d.scale * std::log(2.0 - 2.0 * r);
  }
  throw std::invalid_argument("quantile_signed: unknown kind");
}

double quantile_magnitude(const TargetDistribution& d, double r) {
  d.validate();
  if (!(r >= 0.0 && r < 1.0))
    throw std::domain_error("quantile_magnitude: r must lie in [0, 1), got " +
                            std::to_string(r));
  if (r == 0.0) return 0.0;
  // All supported laws are symmetric about location(), so the magnitude
  // threshold is the signed quantile of the folded probability (1+r)/2.
  return quantile_signed(d, 0.5 * (1.0 + r)) - d.location();
}

DiscreteLaw discretize(const TargetDistribution& d, const std::vector<double>& centers) {
  d.validate();
  if (centers.size() < 2) throw std::invalid_argument("discretize: need at least two centers");
  for (std::size_t i = 1; i < centers.size(); ++i)
    if (!(centers[i] > centers[i - 1]))
      throw std::invalid_argument("discretize: centers must be strictly increasing");

  const std::size_t K = centers.size();
  std::vector<double> edges(K + 1);
  edges[0] = centers[0] - 0.5 * (centers[1] - centers[0]);
  for (std::size_t k = 1; k < K; ++k) edges[k] = 0.5 * (centers[k - 1] + centers[k]);
  edges[K] = centers[K - 1] + 0.5 * (centers[K - 1] - centers[K - 2]);

  DiscreteLaw law;
  law.bins = centers;
  law.probs.resize(K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double m = cdf(d, edges[k + 1]) - cdf(d, edges[k]);
    if (m < 0.0) m = 0.0;  // guard fp wobble in extreme tails
    law.probs[k] = m;
    total += m;
  }
  if (!(total > 0.0))
    throw std::invalid_argument("discretize: target has no mass over the grid extent");
  for (double& p : law.probs) p /= total;
  law.validate();
  return law;
}

double sample(const TargetDistribution& d, std::mt19937_64& rng) {
  d.validate();
  switch (d.kind) {
    case DistKind::Uniform: {
      std::uniform_real_distribution<double> u(-d.half_width, d.half_width);
      return u(rng);
    }
    case DistKind::Gaussian: {
      std::normal_distribution<double> n(d.mu, d.sigma);
      return n(rng);
    }
    case DistKind::Laplace: {
      std::exponential_distribution<double> e(1.0 / d.scale);
      std::bernoulli_distribution sign(0.5);
      const double mag = e(rng);
      return d.loc + (sign(rng) ? mag : -mag);
    }
  }
  throw std::invalid_argument("sample: unknown kind");
}

}  // namespace pmp
