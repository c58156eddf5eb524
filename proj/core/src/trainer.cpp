#include "pmp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "seed_util.hpp"

namespace pmp {

namespace {

using detail::mix_seed;

constexpr std::uint64_t kPhaseModelInit = 1;
constexpr std::uint64_t kPhaseShuffle = 2;
constexpr std::uint64_t kPhaseRetrainShuffle = 3;

void check_dataset_model(const Dataset& ds, const GcnConfig& gcn) {
  if (gcn.nodes != ds.nodes || gcn.s_raw != ds.s_raw)
    throw std::invalid_argument("model geometry (" + std::to_string(gcn.nodes) + " nodes, " +
                                std::to_string(gcn.s_raw) + " channels) does not match dataset (" +
                                std::to_string(ds.nodes) + " nodes, " + std::to_string(ds.s_raw) +
                                " channels)");
  if (gcn.classes != static_cast<int>(ds.meta.class_names.size()))
    throw std::invalid_argument("model expects " + std::to_string(gcn.classes) +
                                " classes, dataset has " +
                                std::to_string(ds.meta.class_names.size()));
}

struct StageOptions {
  WeightMode train_mode = WeightMode::BandStop;
  WeightMode eval_mode = WeightMode::HardExport;
  bool use_kld = true;
  const std::vector<std::vector<char>>* masks = nullptr;  // prunable order, frozen zeros
  std::uint64_t shuffle_phase = kPhaseShuffle;
};

TrainResult run_training(GcnModel model, const Dataset& ds, const TrainConfig& cfg,
                         const StageOptions& opt, const EpochCallback& on_epoch) {
  if (ds.train.empty())
    throw std::invalid_argument("training requires at least one train sample");

  std::vector<Tensor*> params = model.trainable_params();
  if (opt.masks) {
    const auto latents = model.prunable_latents();
    if (opt.masks->size() != latents.size())
      throw std::logic_error("mask count does not match prunable layer count");
    for (std::size_t l = 0; l < latents.size(); ++l)
      if ((*opt.masks)[l].size() != latents[l]->numel())
        throw std::logic_error("mask size does not match latent size");
  }

  AdamState adam = AdamState::init(params);
  LrState lr{cfg.lr0, std::nullopt, std::nullopt};

  BinGrid grid;
  DiscreteLaw target_law;
  if (opt.use_kld) {
    grid = make_grid(cfg.target.omega_min, cfg.target.omega_max, cfg.bins);
    target_law = discretize(cfg.target, grid.centers);
  }

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, opt.shuffle_phase));
  std::vector<std::size_t> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  const std::size_t n_train = ds.train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (opt.train_mode == WeightMode::BandStop) model.bandstop.sigma = cfg.sigma.at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double ce_sum = 0.0;
    double kld_sum = 0.0;
    std::size_t batch_count = 0;

    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t stop = std::min(n_train, start + batch);
      Graph g;
      BoundModel bm = bind_model(g, model, opt.train_mode);
      Var ce_total;
      for (std::size_t i = start; i < stop; ++i) {
        const GraphSample& s = ds.train[order[i]];
        Var ce = cross_entropy(g, forward(g, model.config, bm, s), s.label);
        ce_total = ce_total.valid() ? g.add(ce_total, ce) : ce;
      }
      Var mean_ce = g.mul_scalar(ce_total, 1.0 / static_cast<double>(stop - start));
      Var loss = mean_ce;
      Var kl;
      if (opt.use_kld) {
        // an underflowed histogram means the latents ran away from the target
        // support entirely; surface that as a divergence with a snapshot
        // rather than a bare histogram error
        try {
          SoftHistogram hist = soft_histogram(g, bm.latent_leaves, grid);
          kl = kld(g, target_law, hist);
        } catch (const std::runtime_error& e) {
          throw TrainingDiverged("latents left the histogram support at epoch " +
                                     std::to_string(epoch) + " (" + e.what() + ")",
                                 model, result.history);
        }
        loss = g.add(mean_ce, g.mul_scalar(kl, cfg.lambda));
      }
      const double loss_val = g.value(loss)[0];
      if (!std::isfinite(loss_val))
        throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch), model,
                               result.history);
      g.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Var leaf : bm.leaves) grads.push_back(g.grad(leaf));
      if (opt.masks)
        for (std::size_t l = 0; l < opt.masks->size(); ++l) {
          const std::vector<char>& mask = (*opt.masks)[l];
          Tensor& gr = grads[l];
          for (std::size_t e = 0; e < mask.size(); ++e)
            if (mask[e]) gr[e] = 0.0;
        }
      adam.step(params, grads, lr.lr);
      ce_sum += g.value(ce_total)[0];
      if (opt.use_kld) kld_sum += g.value(kl)[0];
      ++batch_count;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.ce = ce_sum / static_cast<double>(n_train);
    em.kld = opt.use_kld ? kld_sum / static_cast<double>(batch_count) : 0.0;
    em.loss = em.ce + (opt.use_kld ? cfg.lambda * em.kld : 0.0);
    em.lr = lr.lr;
    const double band_a = opt.train_mode == WeightMode::BandStop ? model.bandstop.a : 0.0;
    em.observed_pr = observed_pruning_rate(model.prunable_latents(), band_a);

    if (!std::isfinite(em.loss))
      throw TrainingDiverged("epoch loss became non-finite at epoch " + std::to_string(epoch),
                             model, result.history);
    for (const Tensor* p : params)
      if (!p->all_finite())
        throw TrainingDiverged("a parameter became non-finite at epoch " + std::to_string(epoch),
                               model, result.history);

    em.test_acc = ds.test.empty() ? 0.0 : evaluate(model, ds.test, opt.eval_mode).accuracy;

    adaptive_lr(lr, em.loss, cfg.lr_min, cfg.lr_max);
    result.history.push_back(em);
    if (on_epoch) on_epoch(em);
  }

  result.final_test_acc = result.history.back().test_acc;
  result.model = std::move(model);
  return result;
}

}  // namespace

std::string to_string(QuantileMode m) {
  return m == QuantileMode::Magnitude ? "magnitude" : "signed";
}

QuantileMode quantile_mode_from_string(const std::string& s) {
  if (s == "magnitude") return QuantileMode::Magnitude;
  if (s == "signed") return QuantileMode::Signed;
  throw std::invalid_argument("unknown quantile mode '" + s +
                              "' (expected magnitude or signed)");
}

double SigmaSchedule::at(int epoch) const {
  return sigma0 * std::pow(decay, static_cast<double>(epoch));
}

void SigmaSchedule::validate() const {
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
    throw std::invalid_argument("sigma schedule: sigma0 must be positive and finite");
  if (!(decay > 0.0) || !std::isfinite(decay))
    throw std::invalid_argument("sigma schedule: decay must be positive and finite");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("train config: lambda must be finite and >= 0");
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("train config: rate must lie in [0, 1)");
  if (bins < 2) throw std::invalid_argument("train config: bins must be >= 2");
  if (!(lr0 > 0.0) || !std::isfinite(lr0))
    throw std::invalid_argument("train config: lr0 must be positive and finite");
  if (!(lr_min > 0.0) || !(lr_min <= lr0) || !(lr0 <= lr_max) || !std::isfinite(lr_max))
    throw std::invalid_argument("train config: need 0 < lr_min <= lr0 <= lr_max");
  target.validate();
  sigma.validate();
}

AdamState AdamState::init(const std::vector<Tensor*>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor* p : params) {
    if (!p) throw std::invalid_argument("adam: null parameter");
    st.m.push_back(Tensor::zeros(p->shape()));
    st.v.push_back(Tensor::zeros(p->shape()));
  }
  return st;
}

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                     double lr) {
  if (params.size() != m.size() || grads.size() != m.size())
    throw std::invalid_argument("adam: parameter/gradient count mismatch");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!g.same_shape(p)) throw std::invalid_argument("adam: gradient shape mismatch");
    for (std::size_t e = 0; e < p.numel(); ++e) {
      m[i][e] = beta1 * m[i][e] + (1.0 - beta1) * g[e];
      v[i][e] = beta2 * v[i][e] + (1.0 - beta2) * g[e] * g[e];
      const double mhat = m[i][e] / bc1;
      const double vhat = v[i][e] / bc2;
      p[e] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double adaptive_lr(LrState& st, double loss, double lr_min, double lr_max) {
  std::optional<double> speed;
  if (st.prev_loss) speed = std::abs(loss - *st.prev_loss);
  if (speed && st.prev_speed) {
    if (*speed > *st.prev_speed)
      st.lr *= 0.99;
    else
      st.lr /= 0.99;
    st.lr = std::clamp(st.lr, lr_min, lr_max);
  }
  st.prev_loss = loss;
  if (speed) st.prev_speed = *speed;
  return st.lr;
}

EvalResult evaluate(const GcnModel& model, const std::vector<GraphSample>& samples,
                    WeightMode mode) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  const int classes = model.config.classes;
  std::vector<std::size_t> correct(static_cast<std::size_t>(classes), 0);
  EvalResult r;
  r.per_class.assign(static_cast<std::size_t>(classes), 0.0);
  r.support.assign(static_cast<std::size_t>(classes), 0);
  for (const GraphSample& s : samples) {
    if (s.label < 0 || s.label >= classes)
      throw std::invalid_argument("evaluate: label " + std::to_string(s.label) +
                                  " outside [0, " + std::to_string(classes) + ")");
    const Tensor logits = model.logits(s, mode);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.numel(); ++j)
      if (logits[j] > logits[arg]) arg = j;
    const auto label = static_cast<std::size_t>(s.label);
    ++r.support[label];
    if (arg == label) ++correct[label];
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    if (r.support[cc] == 0) {
      r.warnings.push_back("class " + std::to_string(c) +
                           " has no samples; excluded from the macro average");
      continue;
    }
    r.per_class[cc] =
        static_cast<double>(correct[cc]) / static_cast<double>(r.support[cc]);
    sum += r.per_class[cc];
    ++present;
  }
  r.accuracy = sum / static_cast<double>(present);
  return r;
}

double pruning_threshold(const TargetDistribution& target, double rate, QuantileMode mode) {
  if (mode == QuantileMode::Magnitude) return quantile_magnitude(target, rate);
  if (rate <= 0.0 || rate >= 1.0)
    throw std::invalid_argument("signed quantile mode requires a rate in (0, 1)");
  const double a = quantile_signed(target, rate);
  if (a < 0.0)
    throw std::invalid_argument("signed quantile mode produced a negative threshold (a = " +
                                std::to_string(a) +
                                "); use a rate above the median or magnitude mode");
  return a;
}

GcnConfig make_gcn_config(const Dataset& ds, const GcnHyper& h) {
  GcnConfig cfg;
  cfg.nodes = ds.nodes;
  cfg.s_raw = ds.s_raw;
  cfg.s_emb = h.s_emb;
  cfg.heads = h.heads;
  cfg.filters = h.filters;
  cfg.dense_dim = h.dense_dim;
  cfg.depth = h.depth;
  cfg.classes = static_cast<int>(ds.meta.class_names.size());
  cfg.adjacency_init = ds.adjacency;
  cfg.validate();
  return cfg;
}

TrainResult train_pmp(const Dataset& ds, const GcnConfig& gcn, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  check_dataset_model(ds, gcn);
  BandStopConfig bs;
  bs.a = pruning_threshold(cfg.target, cfg.rate, cfg.quantile_mode);
  bs.sigma = cfg.sigma.at(0);
  bs.validate();
  GcnModel model = GcnModel::init(gcn, bs, mix_seed(cfg.seed, kPhaseModelInit));
  StageOptions opt;
  opt.train_mode = WeightMode::BandStop;
  opt.eval_mode = WeightMode::HardExport;
  opt.use_kld = true;
  opt.shuffle_phase = kPhaseShuffle;
  return run_training(std::move(model), ds, cfg, opt, on_epoch);
}

TrainResult train_dense(const Dataset& ds, const GcnConfig& gcn, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  check_dataset_model(ds, gcn);
  GcnModel model = GcnModel::init(gcn, BandStopConfig{}, mix_seed(cfg.seed, kPhaseModelInit));
  StageOptions opt;
  opt.train_mode = WeightMode::Plain;
  opt.eval_mode = WeightMode::Plain;
  opt.use_kld = false;
  opt.shuffle_phase = kPhaseShuffle;
  return run_training(std::move(model), ds, cfg, opt, on_epoch);
}

std::vector<std::size_t> lowest_magnitude_indices(const std::vector<const Tensor*>& latents,
                                                  std::size_t count) {
  std::size_t total = 0;
  for (const Tensor* t : latents) {
    if (!t) throw std::invalid_argument("lowest_magnitude_indices: null latent");
    total += t->numel();
  }
  if (count > total)
    throw std::invalid_argument("lowest_magnitude_indices: count exceeds entry total");
  if (count == 0) return {};
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(total);
  std::size_t idx = 0;
  for (const Tensor* t : latents)
    for (std::size_t e = 0; e < t->numel(); ++e, ++idx)
      keyed.emplace_back(std::abs((*t)[e]), idx);
  // pairs order by (magnitude, global index), so ties resolve deterministically
  std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count - 1),
                   keyed.end());
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = keyed[i].second;
  return out;
}

TrainResult mp_prune_retrain(const GcnModel& dense, const Dataset& ds, const GcnConfig& gcn,
                             const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  check_dataset_model(ds, gcn);
  GcnModel model = dense;
  model.bandstop = BandStopConfig{};

  std::vector<Tensor*> params = model.trainable_params();
  const std::size_t n_lat = model.prunable_latents().size();
  std::vector<const Tensor*> latents(params.begin(),
                                     params.begin() + static_cast<std::ptrdiff_t>(n_lat));
  std::vector<std::size_t> offsets(n_lat + 1, 0);
  for (std::size_t l = 0; l < n_lat; ++l) offsets[l + 1] = offsets[l] + latents[l]->numel();
  const std::size_t total = offsets.back();
  const std::size_t k = std::min(
      total, static_cast<std::size_t>(std::llround(cfg.rate * static_cast<double>(total))));

  std::vector<std::vector<char>> masks(n_lat);
  for (std::size_t l = 0; l < n_lat; ++l) masks[l].assign(latents[l]->numel(), 0);
  for (std::size_t gidx : lowest_magnitude_indices(latents, k)) {
    const std::size_t l = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), gidx) - offsets.begin() - 1);
    masks[l][gidx - offsets[l]] = 1;
    (*params[l])[gidx - offsets[l]] = 0.0;
  }

  StageOptions opt;
  opt.train_mode = WeightMode::Plain;
  opt.eval_mode = WeightMode::Plain;
  opt.use_kld = false;
  opt.masks = &masks;
  opt.shuffle_phase = kPhaseRetrainShuffle;
  return run_training(std::move(model), ds, cfg, opt, on_epoch);
}

TrainResult train_mp_baseline(const Dataset& ds, const GcnConfig& gcn, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
  TrainResult dense = train_dense(ds, gcn, cfg, on_epoch);
  if (cfg.rate == 0.0) return dense;
  return mp_prune_retrain(dense.model, ds, gcn, cfg, on_epoch);
}

}  // namespace pmp
