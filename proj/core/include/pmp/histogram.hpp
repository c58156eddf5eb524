#pragma once

#include <vector>

#include "pmp/autodiff.hpp"
#include "pmp/distributions.hpp"

namespace pmp {

// Uniformly spaced bin centers over [omega_min, omega_max] with kernel widths
// beta_k equal to half the center spacing.
struct BinGrid {
  std::vector<double> centers;
  std::vector<double> widths;
  void validate() const;
  double spacing() const;  // distance between adjacent centers
};

BinGrid make_grid(double omega_min, double omega_max, int K);

// A histogram living on a graph: `mass` is the normalized K-vector node.
struct SoftHistogram {
  BinGrid grid;
  Var mass;
};

// Gaussian-kernel histogram of every entry of every latent tensor,
// normalized to total mass one. Each entry contributes
// exp(-(w - q_k)^2 / beta_k^2) to bin k. Contributions are evaluated inside a
// window of 6.5 beta around each entry; beyond it the kernel is below 1e-18
// of its peak, which is beyond double resolution once bins are summed.
// Entries far outside the grid therefore add nothing, and a histogram whose
// total mass underflows to zero raises an error instead of normalizing.
SoftHistogram soft_histogram(Graph& g, const std::vector<Var>& latents, const BinGrid& grid);

// Graph-free evaluation of the same map (curve dumps, tests).
std::vector<double> soft_histogram_eval(const std::vector<const Tensor*>& latents,
                                        const BinGrid& grid);

// Nearest-center counting histogram, normalized; the beta -> 0 limit of the
// soft map.
std::vector<double> hard_histogram(const std::vector<const Tensor*>& latents,
                                   const BinGrid& grid);

// D_KL(p || q) = sum_k p_k (ln p_k - ln max(q_k, 1e-8)) as a scalar graph
// node. p must live on the same grid as q.
Var kld(Graph& g, const DiscreteLaw& p, const SoftHistogram& q);

// The epsilon floor applied to q inside kld.
inline constexpr double kKldMassFloor = 1e-8;

}  // namespace pmp
