#include "pmp/bandstop.hpp"

#include <cmath>
#include <stdexcept>

namespace pmp {

namespace {

constexpr double kExpClamp = 700.0;

// psi and, when the exponent is unclamped, its sigmoid identity
// psi' (w) = 2 w psi (1 - psi). Inside the clamp region the exponent is
// constant so psi contributes no derivative of its own.
inline double psi_of(double w, double a, double sigma, bool* clamped) {
  double t = a * a - w * w;
  if (t > kExpClamp) {
    t = kExpClamp;
    if (clamped) *clamped = true;
  } else if (t < -kExpClamp) {
    t = -kExpClamp;
    if (clamped) *clamped = true;
  } else if (clamped) {
    *clamped = false;
  }
  return 1.0 / (1.0 + sigma * std::exp(t));
}

}  // namespace

void BandStopConfig::validate() const {
  if (!(a >= 0.0)) throw std::invalid_argument("BandStopConfig: a must be non-negative");
  if (!(sigma > 0.0)) throw std::invalid_argument("BandStopConfig: sigma must be positive");
}

double band_stop(double w_hat, const BandStopConfig& cfg) {
  cfg.validate();
  return psi_of(w_hat, cfg.a, cfg.sigma, nullptr);
}

double half_transition(const BandStopConfig& cfg) {
  cfg.validate();
  const double s = cfg.a * cfg.a + std::log(cfg.sigma);
  if (s < 0.0)
    throw std::domain_error("half_transition: a^2 + ln(sigma) is negative, psi stays above 1/2");
  return std::sqrt(s);
}

Var effective_weights(Graph& g, Var latent, const BandStopConfig& cfg) {
  cfg.validate();
  const Tensor& w = g.value(latent);
  Tensor out = w;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = w[i] * psi_of(w[i], cfg.a, cfg.sigma, nullptr);
  const double a = cfg.a, sigma = cfg.sigma;
  return g.make_node(std::move(out), {latent},
                     [a, sigma](const Tensor&, const Tensor& gr,
                                const std::vector<const Tensor*>& in,
                                const std::vector<Tensor*>& gin) {
                       if (!gin[0]) return;
                       const Tensor& w = *in[0];
                       for (std::size_t i = 0; i < gr.numel(); ++i) {
                         bool clamped = false;
                         const double p = psi_of(w[i], a, sigma, &clamped);
                         double d = p;
                         if (!clamped) d += 2.0 * w[i] * w[i] * p * (1.0 - p);
                         (*gin[0])[i] += gr[i] * d;
                       }
                     });
}

Tensor effective_weights(const Tensor& latent, const BandStopConfig& cfg) {
  cfg.validate();
  Tensor out = latent;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = latent[i] * psi_of(latent[i], cfg.a, cfg.sigma, nullptr);
  return out;
}

Tensor hard_export(const Tensor& latent, const BandStopConfig& cfg) {
  cfg.validate();
  Tensor out = latent;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (std::abs(latent[i]) <= cfg.a)
      out[i] = 0.0;
    else
      out[i] = latent[i] * psi_of(latent[i], cfg.a, cfg.sigma, nullptr);
  }
  return out;
}

double observed_pruning_rate(const std::vector<const Tensor*>& latents, double a) {
  if (!(a >= 0.0)) throw std::invalid_argument("observed_pruning_rate: a must be non-negative");
  std::size_t total = 0, pruned = 0;
  for (const Tensor* t : latents) {
    if (!t) throw std::invalid_argument("observed_pruning_rate: null layer");
    total += t->numel();
    for (std::size_t i = 0; i < t->numel(); ++i)
      if (std::abs((*t)[i]) <= a) ++pruned;
  }
  if (total == 0)
    throw std::invalid_argument("observed_pruning_rate: no latent entries given");
  return static_cast<double>(pruned) / static_cast<double>(total);
}

}  // namespace pmp
