#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmp/bandstop.hpp"
#include "pmp/data.hpp"
#include "pmp/distributions.hpp"
#include "pmp/gcn.hpp"
#include "pmp/histogram.hpp"

namespace pmp {

// How a pruning rate r maps to the gate threshold: Magnitude solves
// P(|W - location| <= a) = r, Signed uses the signed quantile directly
// (and rejects configurations where that comes out negative).
enum class QuantileMode { Magnitude, Signed };

std::string to_string(QuantileMode m);
QuantileMode quantile_mode_from_string(const std::string& s);

// sigma(t) = sigma0 * decay^t. The default holds sigma at 1 for every epoch.
// Note that growing sigma widens the gate's stop band (the half-transition
// moves to sqrt(a^2 + ln sigma)) rather than sharpening it.
struct SigmaSchedule {
  double sigma0 = 1.0;
  double decay = 1.0;
  double at(int epoch) const;
  void validate() const;
};

struct TrainConfig {
  int epochs = 300;
  int batch_size = 32;
  double lambda = 10.0;  // weight of the distribution-matching term
  double rate = 0.0;     // requested pruning rate r in [0, 1)
  TargetDistribution target = TargetDistribution::gaussian(0.0, 0.3, -1.0, 1.0);
  int bins = 100;  // histogram resolution over [omega_min, omega_max]
  double lr0 = 0.01;
  double lr_min = 1e-4;
  double lr_max = 0.05;
  std::uint64_t seed = 0;
  QuantileMode quantile_mode = QuantileMode::Magnitude;
  SigmaSchedule sigma;
  void validate() const;
};

// Adam with bias correction. m/v are aligned with the parameter list the
// state was initialized from; step() updates the parameters in place.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState init(const std::vector<Tensor*>& params);
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr);
};

// Loss-speed feedback on the learning rate: once two speeds
// |loss(t) - loss(t-1)| exist, a speed increase multiplies lr by 0.99 and
// anything else divides by 0.99, clamped to [lr_min, lr_max]. The first
// adjustment therefore happens on the third recorded loss.
struct LrState {
  double lr = 0.0;
  std::optional<double> prev_loss;
  std::optional<double> prev_speed;
};

double adaptive_lr(LrState& st, double loss, double lr_min, double lr_max);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;  // ce + lambda * kld
  double ce = 0.0;
  double kld = 0.0;
  double observed_pr = 0.0;  // fraction of latents inside the stop band
  double lr = 0.0;
  double test_acc = 0.0;  // macro accuracy, deployment weights
};

struct TrainResult {
  GcnModel model;
  std::vector<EpochMetrics> history;
  double final_test_acc = 0.0;
};

// Thrown when an epoch loss or a parameter stops being finite; carries the
// model and history at the moment of failure for post-mortem dumps.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& msg, GcnModel snapshot_, std::vector<EpochMetrics> history_)
      : std::runtime_error(msg), snapshot(std::move(snapshot_)), history(std::move(history_)) {}
  GcnModel snapshot;
  std::vector<EpochMetrics> history;
};

struct EvalResult {
  double accuracy = 0.0;  // macro average over classes present in the sample set
  std::vector<double> per_class;
  std::vector<std::size_t> support;
  std::vector<std::string> warnings;  // one note per absent class
};

// Macro-averaged per-class accuracy. Argmax breaks ties toward the lowest
// class index; classes with no samples are excluded from the average and
// reported in warnings.
EvalResult evaluate(const GcnModel& model, const std::vector<GraphSample>& samples,
                    WeightMode mode);

// Architecture sized for a dataset; everything else comes from the knobs.
struct GcnHyper {
  int s_emb = 16;
  int heads = 8;
  int filters = 32;
  int dense_dim = 64;
  int depth = 1;
};

GcnConfig make_gcn_config(const Dataset& ds, const GcnHyper& h);

// Gate threshold implied by a pruning rate under the chosen quantile family.
double pruning_threshold(const TargetDistribution& target, double rate, QuantileMode mode);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Gate-based pruning: the threshold a is fixed from (target, rate) before
// training, every prunable weight trains through the band-stop gate, and the
// loss adds lambda times the distance between the pooled latent histogram
// and the target law. Test accuracy is measured on hard-exported weights.
TrainResult train_pmp(const Dataset& ds, const GcnConfig& gcn, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {});

// Plain cross-entropy training, no gate and no histogram term.
TrainResult train_dense(const Dataset& ds, const GcnConfig& gcn, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

// Indices (into the concatenation of the given latents, in order) of the
// `count` smallest entries by |value|, ties broken toward the lower global
// index. Selection only; order within the result is unspecified.
std::vector<std::size_t> lowest_magnitude_indices(const std::vector<const Tensor*>& latents,
                                                  std::size_t count);

// Second stage of the magnitude baseline: zero the bottom round(r * N)
// latent entries of a trained dense model, then retrain for cfg.epochs with
// those entries frozen at zero.
TrainResult mp_prune_retrain(const GcnModel& dense, const Dataset& ds, const GcnConfig& gcn,
                             const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Full magnitude-pruning baseline: dense stage, global bottom-|w| pruning at
// cfg.rate, masked retraining stage. cfg.rate == 0 returns the dense result
// unchanged. Both stages run cfg.epochs epochs.
TrainResult train_mp_baseline(const Dataset& ds, const GcnConfig& gcn, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

}  // namespace pmp
