#include "pmp/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pmp {

namespace {

constexpr double kWindowBetas = 6.5;

struct GridLayout {
  double c0;       // first center
  double h;        // spacing
  std::size_t K;
};

GridLayout layout_of(const BinGrid& grid) {
  grid.validate();
  return {grid.centers.front(), grid.spacing(), grid.centers.size()};
}

// Inclusive index range of centers within the kernel window of w; falls back
// to the nearest center so every entry touches at least one bin.
inline void window_range(const GridLayout& L, double w, double radius, std::size_t* lo,
                         std::size_t* hi) {
  const double lo_f = std::ceil((w - radius - L.c0) / L.h);
  const double hi_f = std::floor((w + radius - L.c0) / L.h);
  double lo_c = std::max(lo_f, 0.0);
  double hi_c = std::min(hi_f, static_cast<double>(L.K - 1));
  if (lo_c > hi_c) {
    double nearest = std::round((w - L.c0) / L.h);
    nearest = std::min(std::max(nearest, 0.0), static_cast<double>(L.K - 1));
    lo_c = hi_c = nearest;
  }
  *lo = static_cast<std::size_t>(lo_c);
  *hi = static_cast<std::size_t>(hi_c);
}

std::vector<double> raw_mass(const std::vector<const Tensor*>& latents, const BinGrid& grid) {
  const GridLayout L = layout_of(grid);
  std::vector<double> mass(L.K, 0.0);
  bool any_entry = false;
  for (const Tensor* t : latents) {
    if (!t) throw std::invalid_argument("soft_histogram: null latent tensor");
    for (std::size_t i = 0; i < t->numel(); ++i) {
      any_entry = true;
      const double w = (*t)[i];
      std::size_t lo, hi;
      window_range(L, w, kWindowBetas * grid.widths[0], &lo, &hi);
      for (std::size_t k = lo; k <= hi; ++k) {
        const double z = (w - grid.centers[k]) / grid.widths[k];
        mass[k] += std::exp(-z * z);
      }
    }
  }
  if (!any_entry) throw std::invalid_argument("soft_histogram: no latent entries given");
  return mass;
}

double total_of(const std::vector<double>& mass) {
  double s = 0.0;
  for (double m : mass) s += m;
  if (!(s > 0.0))
    throw std::runtime_error(
        "soft_histogram: total mass underflowed to zero; weights sit far outside the grid");
  return s;
}

}  // namespace

void BinGrid::validate() const {
  if (centers.size() < 2) throw std::invalid_argument("BinGrid: need at least two centers");
  if (widths.size() != centers.size())
    throw std::invalid_argument("BinGrid: widths/centers length mismatch");
  const double h = centers[1] - centers[0];
  if (!(h > 0.0)) throw std::invalid_argument("BinGrid: centers must be increasing");
  for (std::size_t i = 1; i < centers.size(); ++i) {
    const double d = centers[i] - centers[i - 1];
    if (std::abs(d - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw std::invalid_argument("BinGrid: centers must be uniformly spaced");
  }
  for (double b : widths)
    if (!(b > 0.0)) throw std::invalid_argument("BinGrid: widths must be positive");
}

double BinGrid::spacing() const {
  if (centers.size() < 2) throw std::invalid_argument("BinGrid: need at least two centers");
  return centers[1] - centers[0];
}

BinGrid make_grid(double omega_min, double omega_max, int K) {
  if (!(omega_min < omega_max))
    throw std::invalid_argument("make_grid: omega_min must be below omega_max");
  if (K < 2) throw std::invalid_argument("make_grid: K must be at least 2");
  BinGrid grid;
  const double h = (omega_max - omega_min) / static_cast<double>(K);
  grid.centers.resize(static_cast<std::size_t>(K));
  grid.widths.assign(static_cast<std::size_t>(K), 0.5 * h);
  for (int k = 0; k < K; ++k)
    grid.centers[static_cast<std::size_t>(k)] = omega_min + (k + 0.5) * h;
  grid.validate();
  return grid;
}

std::vector<double> soft_histogram_eval(const std::vector<const Tensor*>& latents,
                                        const BinGrid& grid) {
  std::vector<double> mass = raw_mass(latents, grid);
  const double total = total_of(mass);
  for (double& m : mass) m /= total;
  return mass;
}

std::vector<double> hard_histogram(const std::vector<const Tensor*>& latents,
                                   const BinGrid& grid) {
  const GridLayout L = layout_of(grid);
  std::vector<double> mass(L.K, 0.0);
  double total = 0.0;
  for (const Tensor* t : latents) {
    if (!t) throw std::invalid_argument("hard_histogram: null latent tensor");
    for (std::size_t i = 0; i < t->numel(); ++i) {
      double k = std::round(((*t)[i] - L.c0) / L.h);
      k = std::min(std::max(k, 0.0), static_cast<double>(L.K - 1));
      mass[static_cast<std::size_t>(k)] += 1.0;
      total += 1.0;
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("hard_histogram: no latent entries given");
  for (double& m : mass) m /= total;
  return mass;
}

SoftHistogram soft_histogram(Graph& g, const std::vector<Var>& latents, const BinGrid& grid) {
  std::vector<const Tensor*> tensors;
  tensors.reserve(latents.size());
  for (Var v : latents) tensors.push_back(&g.value(v));
  std::vector<double> mass = raw_mass(tensors, grid);
  const double total = total_of(mass);
  Tensor value({mass.size()});
  for (std::size_t k = 0; k < mass.size(); ++k) value[k] = mass[k] / total;

  // Backward through y_k = m_k / S: dL/dm_k = (g_k - sum_j g_j y_j) / S, then
  // dL/dw = sum_k dL/dm_k * K(w, q_k) * -2 (w - q_k) / beta_k^2 over the same
  // window the forward pass used.
  const BinGrid grid_copy = grid;
  Var node = g.make_node(
      std::move(value), latents,
      [grid_copy, total](const Tensor& y, const Tensor& gr,
                         const std::vector<const Tensor*>& in,
                         const std::vector<Tensor*>& gin) {
        const GridLayout L = layout_of(grid_copy);
        double dot = 0.0;
        for (std::size_t k = 0; k < L.K; ++k) dot += gr[k] * y[k];
        std::vector<double> gm(L.K);
        for (std::size_t k = 0; k < L.K; ++k) gm[k] = (gr[k] - dot) / total;
        for (std::size_t t = 0; t < in.size(); ++t) {
          if (!gin[t]) continue;
          const Tensor& w = *in[t];
          Tensor& gw = *gin[t];
          for (std::size_t i = 0; i < w.numel(); ++i) {
            std::size_t lo, hi;
            window_range(L, w[i], kWindowBetas * grid_copy.widths[0], &lo, &hi);
            double acc = 0.0;
            for (std::size_t k = lo; k <= hi; ++k) {
              const double beta = grid_copy.widths[k];
              const double z = (w[i] - grid_copy.centers[k]) / beta;
              acc += gm[k] * std::exp(-z * z) * (-2.0 * z / beta);
            }
            gw[i] += acc;
          }
        }
      });
  return SoftHistogram{grid, node};
}

Var kld(Graph& g, const DiscreteLaw& p, const SoftHistogram& q) {
  p.validate();
  q.grid.validate();
  const Tensor& qv = g.value(q.mass);
  if (p.bins.size() != qv.numel() || p.bins != q.grid.centers)
    throw std::invalid_argument("kld: p and q live on different bin grids");

  double d = 0.0;
  for (std::size_t k = 0; k < p.probs.size(); ++k) {
    const double pk = p.probs[k];
    if (pk <= 0.0) continue;
    d += pk * (std::log(pk) - std::log(std::max(qv[k], kKldMassFloor)));
  }
  const std::vector<double> probs = p.probs;
  return g.make_node(Tensor::scalar(d), {q.mass},
                     [probs](const Tensor&, const Tensor& gr,
                             const std::vector<const Tensor*>& in,
                             const std::vector<Tensor*>& gin) {
                       if (!gin[0]) return;
                       const Tensor& qv = *in[0];
                       for (std::size_t k = 0; k < probs.size(); ++k) {
                         // the floor region is flat, so entries below it get
                         // no pull from their own bin
                         if (probs[k] <= 0.0 || qv[k] <= kKldMassFloor) continue;
                         (*gin[0])[k] += gr[0] * (-probs[k] / qv[k]);
                       }
                     });
}

}  // namespace pmp
