#include "pmp/gcn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace pmp {

namespace {

Tensor uniform_scaled(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                      std::size_t fan_in) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng) * scale;
  return t;
}

}  // namespace

void GcnConfig::validate() const {
  if (nodes < 1) throw std::invalid_argument("GcnConfig: nodes must be positive");
  if (s_raw < 1) throw std::invalid_argument("GcnConfig: s_raw must be positive");
  if (s_emb < 1) throw std::invalid_argument("GcnConfig: s_emb must be positive");
  if (heads < 1) throw std::invalid_argument("GcnConfig: heads must be positive");
  if (filters < 1) throw std::invalid_argument("GcnConfig: filters must be positive");
  if (dense_dim < 1) throw std::invalid_argument("GcnConfig: dense_dim must be positive");
  if (classes < 2) throw std::invalid_argument("GcnConfig: need at least two classes");
  if (depth < 1) throw std::invalid_argument("GcnConfig: depth must be positive");
  const std::size_t n = static_cast<std::size_t>(nodes);
  if (adjacency_init.rank() != 2 || adjacency_init.rows() != n || adjacency_init.cols() != n)
    throw std::invalid_argument("GcnConfig: adjacency_init must be nodes x nodes");
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += adjacency_init.at(i, j);
    if (std::abs(row - 1.0) > 1e-6)
      throw std::invalid_argument("GcnConfig: adjacency_init row " + std::to_string(i) +
                                  " sums to " + std::to_string(row));
  }
}

GcnModel GcnModel::init(const GcnConfig& cfg, const BandStopConfig& bs, std::uint64_t seed) {
  cfg.validate();
  bs.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> attn_noise(0.0, 0.01);

  GcnModel m;
  m.config = cfg;
  m.bandstop = bs;
  const std::size_t n = static_cast<std::size_t>(cfg.nodes);

  m.embed = {"embed", uniform_scaled(rng, static_cast<std::size_t>(cfg.s_raw),
                                     static_cast<std::size_t>(cfg.s_emb),
                                     static_cast<std::size_t>(cfg.s_raw))};
  for (int b = 0; b < cfg.depth; ++b) {
    const std::size_t in_ch =
        (b == 0) ? static_cast<std::size_t>(cfg.s_emb) : static_cast<std::size_t>(cfg.filters);
    for (int h = 0; h < cfg.heads; ++h) {
      Tensor a = cfg.adjacency_init;
      for (std::size_t i = 0; i < a.numel(); ++i) a[i] += attn_noise(rng);
      m.attention.push_back(std::move(a));
      m.conv.push_back({"conv_b" + std::to_string(b) + "_h" + std::to_string(h),
                        uniform_scaled(rng, in_ch, static_cast<std::size_t>(cfg.filters),
                                       in_ch)});
    }
  }
  const std::size_t flat = n * static_cast<std::size_t>(cfg.filters);
  m.dense = {"dense", uniform_scaled(rng, flat, static_cast<std::size_t>(cfg.dense_dim), flat)};
  m.classifier = uniform_scaled(rng, static_cast<std::size_t>(cfg.dense_dim),
                                static_cast<std::size_t>(cfg.classes),
                                static_cast<std::size_t>(cfg.dense_dim));
  return m;
}

std::vector<const Tensor*> GcnModel::prunable_latents() const {
  std::vector<const Tensor*> out;
  out.push_back(&embed.latent);
  for (const LatentLayer& l : conv) out.push_back(&l.latent);
  out.push_back(&dense.latent);
  return out;
}

std::vector<Tensor*> GcnModel::trainable_params() {
  std::vector<Tensor*> out;
  out.push_back(&embed.latent);
  for (LatentLayer& l : conv) out.push_back(&l.latent);
  out.push_back(&dense.latent);
  for (Tensor& t : attention) out.push_back(&t);
  out.push_back(&classifier);
  return out;
}

BoundModel bind_model(Graph& g, const GcnModel& model, WeightMode mode) {
  model.config.validate();
  const bool train = (mode != WeightMode::HardExport);

  auto weight_of = [&](Var leaf) {
    switch (mode) {
      case WeightMode::BandStop: return effective_weights(g, leaf, model.bandstop);
      case WeightMode::Plain: return leaf;
      case WeightMode::HardExport: return leaf;  // leaf already holds the export
    }
    throw std::invalid_argument("bind_model: unknown mode");
  };
  auto leaf_of = [&](const Tensor& t) {
    if (mode == WeightMode::HardExport) return g.constant(hard_export(t, model.bandstop));
    return train ? g.param(t) : g.constant(t);
  };

  BoundModel bm;
  Var embed_leaf = leaf_of(model.embed.latent);
  bm.leaves.push_back(embed_leaf);
  bm.latent_leaves.push_back(embed_leaf);
  bm.embed_w = weight_of(embed_leaf);
  for (const LatentLayer& l : model.conv) {
    Var leaf = leaf_of(l.latent);
    bm.leaves.push_back(leaf);
    bm.latent_leaves.push_back(leaf);
    bm.conv_w.push_back(weight_of(leaf));
  }
  Var dense_leaf = leaf_of(model.dense.latent);
  bm.leaves.push_back(dense_leaf);
  bm.latent_leaves.push_back(dense_leaf);
  bm.dense_w = weight_of(dense_leaf);
  for (const Tensor& a : model.attention) {
    Var leaf = (mode == WeightMode::HardExport) ? g.constant(a) : g.param(a);
    bm.leaves.push_back(leaf);
    bm.attention.push_back(leaf);
  }
  Var cls_leaf = (mode == WeightMode::HardExport) ? g.constant(model.classifier)
                                                  : g.param(model.classifier);
  bm.leaves.push_back(cls_leaf);
  bm.classifier_w = cls_leaf;
  return bm;
}

Var graph_conv(Graph& g, const std::vector<Var>& attention, Var signal,
               const std::vector<Var>& filters) {
  if (attention.empty() || attention.size() != filters.size())
    throw std::invalid_argument("graph_conv: need matching non-empty attention/filter lists");
  Var ut = g.transpose(signal);  // nodes x channels
  Var acc;
  for (std::size_t k = 0; k < attention.size(); ++k) {
    Var head = g.matmul(g.matmul(attention[k], ut), filters[k]);
    acc = (k == 0) ? head : g.add(acc, head);
  }
  return g.relu(acc);
}

Var forward(Graph& g, const GcnConfig& cfg, const BoundModel& bm, const GraphSample& sample) {
  const std::size_t n = static_cast<std::size_t>(cfg.nodes);
  if (sample.node_signal.rank() != 2 ||
      sample.node_signal.rows() != static_cast<std::size_t>(cfg.s_raw) ||
      sample.node_signal.cols() != n)
    throw std::invalid_argument("forward: node_signal must be s_raw x nodes, have " +
                                sample.node_signal.shape_str());

  Var u = g.constant(sample.node_signal);
  Var signal = g.matmul(g.transpose(bm.embed_w), u);  // s_emb x n
  const std::size_t heads = static_cast<std::size_t>(cfg.heads);
  for (int b = 0; b < cfg.depth; ++b) {
    std::vector<Var> attn(bm.attention.begin() + b * heads,
                          bm.attention.begin() + (b + 1) * heads);
    std::vector<Var> filt(bm.conv_w.begin() + b * heads, bm.conv_w.begin() + (b + 1) * heads);
    Var block = graph_conv(g, attn, signal, filt);  // n x filters
    signal = g.transpose(block);                    // filters x n
  }
  Var flat = g.reshape(g.transpose(signal), {1, n * static_cast<std::size_t>(cfg.filters)});
  Var hidden = g.relu(g.matmul(flat, bm.dense_w));
  return g.matmul(hidden, bm.classifier_w);
}

Var cross_entropy(Graph& g, Var logits, int label) {
  const Tensor& l = g.value(logits);
  const std::size_t C = l.numel();
  if (C < 2) throw std::invalid_argument("cross_entropy: need at least two logits");
  if (label < 0 || static_cast<std::size_t>(label) >= C)
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(C) + " classes");
  double shift = l[0];
  for (std::size_t i = 1; i < C; ++i) shift = std::max(shift, l[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < C; ++i) z += std::exp(l[i] - shift);
  const double loss = shift + std::log(z) - l[static_cast<std::size_t>(label)];
  return g.make_node(Tensor::scalar(loss), {logits},
                     [label, shift, z](const Tensor&, const Tensor& gr,
                                       const std::vector<const Tensor*>& in,
                                       const std::vector<Tensor*>& gin) {
                       if (!gin[0]) return;
                       const Tensor& l = *in[0];
                       for (std::size_t i = 0; i < l.numel(); ++i) {
                         double d = std::exp(l[i] - shift) / z;
                         if (i == static_cast<std::size_t>(label)) d -= 1.0;
                         (*gin[0])[i] += gr[0] * d;
                       }
                     });
}

Tensor GcnModel::logits(const GraphSample& sample, WeightMode mode) const {
  config.validate();
  const std::size_t n = static_cast<std::size_t>(config.nodes);
  if (sample.node_signal.rank() != 2 ||
      sample.node_signal.rows() != static_cast<std::size_t>(config.s_raw) ||
      sample.node_signal.cols() != n)
    throw std::invalid_argument("logits: node_signal must be s_raw x nodes, have " +
                                sample.node_signal.shape_str());

  auto weight_of = [&](const Tensor& latent) {
    switch (mode) {
      case WeightMode::BandStop: return effective_weights(latent, bandstop);
      case WeightMode::Plain: return latent;
      case WeightMode::HardExport: return hard_export(latent, bandstop);
    }
    throw std::invalid_argument("logits: unknown mode");
  };

  Tensor signal = matmul(transposed(weight_of(embed.latent)), sample.node_signal);
  const std::size_t heads = static_cast<std::size_t>(config.heads);
  for (int b = 0; b < config.depth; ++b) {
    Tensor ut = transposed(signal);
    Tensor acc;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t k = static_cast<std::size_t>(b) * heads + h;
      Tensor head = matmul(matmul(attention[k], ut), weight_of(conv[k].latent));
      if (h == 0) {
        acc = std::move(head);
      } else {
        for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += head[i];
      }
    }
    signal = transposed(relu(acc));
  }
  Tensor flat(std::vector<std::size_t>{1, n * static_cast<std::size_t>(config.filters)});
  Tensor st = transposed(signal);  // n x filters
  for (std::size_t i = 0; i < flat.numel(); ++i) flat[i] = st[i];
  Tensor hidden = relu(matmul(flat, weight_of(dense.latent)));
  return matmul(hidden, classifier);
}

ParamCounts count_params(const GcnModel& model) {
  ParamCounts c;
  c.per_layer.emplace_back(model.embed.name, model.embed.latent.numel());
  for (const LatentLayer& l : model.conv) c.per_layer.emplace_back(l.name, l.latent.numel());
  c.per_layer.emplace_back(model.dense.name, model.dense.latent.numel());
  for (const auto& [name, n] : c.per_layer) {
    (void)name;
    c.total += n;
  }
  if (c.total == 0) throw std::invalid_argument("count_params: model has no prunable entries");
  return c;
}

}  // namespace pmp
