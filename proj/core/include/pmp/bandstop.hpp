#pragma once

#include <string>
#include <vector>

#include "pmp/autodiff.hpp"
#include "pmp/tensor.hpp"

namespace pmp {

// Gate parameters shared by every prunable layer of a model. The gate is
// psi(w) = 1 / (1 + sigma * exp(a^2 - w^2)); the exponent is clamped to
// +/-700 so exp never overflows. With sigma = 1 the gate crosses 1/2 exactly
// at |w| = a; in general the half-transition sits at sqrt(a^2 + ln sigma).
struct BandStopConfig {
  double a = 0.0;
  double sigma = 1.0;
  void validate() const;
};

// One prunable weight matrix; the latent tensor is what the optimizer and the
// histogram see, the gated product is what forward passes use.
struct LatentLayer {
  std::string name;
  Tensor latent;
};

double band_stop(double w_hat, const BandStopConfig& cfg);

// |w| where psi crosses 1/2; requires a^2 + ln(sigma) >= 0.
double half_transition(const BandStopConfig& cfg);

// Elementwise w * psi(w) as a graph op; gradients flow through both factors.
Var effective_weights(Graph& g, Var latent, const BandStopConfig& cfg);

// Same map without a graph.
Tensor effective_weights(const Tensor& latent, const BandStopConfig& cfg);

// Deployment tensor: entries with |w| <= a become exactly 0, the rest keep
// w * psi(w).
Tensor hard_export(const Tensor& latent, const BandStopConfig& cfg);

// Fraction of latent entries with |w| <= a across all given layers.
double observed_pruning_rate(const std::vector<const Tensor*>& latents, double a);

}  // namespace pmp
