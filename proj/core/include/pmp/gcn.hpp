#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmp/autodiff.hpp"
#include "pmp/bandstop.hpp"
#include "pmp/tensor.hpp"

namespace pmp {

// One classification sample: node_signal is (s_raw x n), one column of
// chunked coordinates per skeleton joint.
struct GraphSample {
  Tensor node_signal;
  int label = 0;
};

struct GcnConfig {
  int nodes = 0;      // n, joints
  int s_raw = 0;      // input channels per node (3 * chunk count)
  int s_emb = 16;     // embedding channels
  int heads = 8;      // attention heads per block
  int filters = 32;   // output channels per block
  int dense_dim = 64; // hidden width of the readout
  int classes = 0;
  int depth = 1;      // attention+conv blocks
  Tensor adjacency_init;  // n x n, row-stochastic; seeds the attention heads
  void validate() const;
};

// Which weights a forward pass should use for the prunable layers.
enum class WeightMode {
  BandStop,    // latent * psi(latent), training path
  Plain,       // latent as-is, dense/baseline path
  HardExport,  // thresholded export, deployment path
};

// Attention matrices and the classifier are never pruned; every other weight
// matrix is a LatentLayer and participates in the pooled weight histogram.
// No layer carries a bias.
struct GcnModel {
  GcnConfig config;
  BandStopConfig bandstop;
  LatentLayer embed;                 // s_raw x s_emb
  std::vector<Tensor> attention;     // depth*heads of n x n
  std::vector<LatentLayer> conv;     // depth*heads; block 0: s_emb x filters,
                                     // deeper blocks: filters x filters
  LatentLayer dense;                 // (n*filters) x dense_dim
  Tensor classifier;                 // dense_dim x classes

  // Latent scales are uniform in [-0.5, 0.5] times 1/sqrt(fan-in); attention
  // heads start at the adjacency plus N(0, 0.01) noise.
  static GcnModel init(const GcnConfig& cfg, const BandStopConfig& bs, std::uint64_t seed);

  std::vector<const Tensor*> prunable_latents() const;
  std::vector<Tensor*> trainable_params();  // latents, attention, classifier

  // Logits for one sample without building a graph; applies the same kernels
  // in the same order as the graph forward, so values agree bit for bit.
  Tensor logits(const GraphSample& sample, WeightMode mode) const;
};

// Leaves and derived weight nodes for one training graph.
struct BoundModel {
  std::vector<Var> leaves;  // aligned with trainable_params() order
  Var embed_w;
  std::vector<Var> attention;
  std::vector<Var> conv_w;
  Var dense_w;
  Var classifier_w;
  std::vector<Var> latent_leaves;  // the histogram inputs, prunable order
};

BoundModel bind_model(Graph& g, const GcnModel& model, WeightMode mode);

// relu(sum_k A_k * U^T * W_k) for one block; signal is channels x nodes.
Var graph_conv(Graph& g, const std::vector<Var>& attention, Var signal,
               const std::vector<Var>& filters);

Var forward(Graph& g, const GcnConfig& cfg, const BoundModel& bm, const GraphSample& sample);

// Numerically stabilized -log softmax(logits)[label]; logits may be any
// single-row tensor.
Var cross_entropy(Graph& g, Var logits, int label);

struct ParamCounts {
  std::vector<std::pair<std::string, std::size_t>> per_layer;
  std::size_t total = 0;  // prunable entries only
};

ParamCounts count_params(const GcnModel& model);

}  // namespace pmp
