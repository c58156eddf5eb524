#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmp/autodiff.hpp"
#include "pmp/bandstop.hpp"
#include "pmp/checkpoint.hpp"
#include "pmp/data.hpp"
#include "pmp/gcn.hpp"
#include "pmp/tensor.hpp"

using namespace pmp;

namespace {

Tensor chain_adjacency(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int j = 1; j < n; ++j) edges.emplace_back(j - 1, j);
  return adjacency_from_edges(n, edges);
}

GcnConfig tiny_config() {
  GcnConfig cfg;
  cfg.nodes = 3;
  cfg.s_raw = 4;
  cfg.s_emb = 2;
  cfg.heads = 2;
  cfg.filters = 2;
  cfg.dense_dim = 3;
  cfg.classes = 2;
  cfg.depth = 1;
  cfg.adjacency_init = chain_adjacency(3);
  return cfg;
}

GraphSample random_sample(const GcnConfig& cfg, int label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GraphSample s;
  s.node_signal = Tensor({static_cast<std::size_t>(cfg.s_raw),
                          static_cast<std::size_t>(cfg.nodes)});
  for (std::size_t i = 0; i < s.node_signal.numel(); ++i) s.node_signal[i] = u(rng);
  s.label = label;
  return s;
}

bool identical(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("config validation") {
  GcnConfig cfg = tiny_config();
  cfg.validate();
  GcnConfig bad = cfg;
  bad.classes = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.adjacency_init = Tensor({2, 2}, {0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.adjacency_init.at(1, 1) += 0.3;  // row no longer sums to 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.depth = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("init is seed-deterministic and seed-sensitive") {
  GcnConfig cfg = tiny_config();
  BandStopConfig bs{0.3, 1.0};
  GcnModel a = GcnModel::init(cfg, bs, 42);
  GcnModel b = GcnModel::init(cfg, bs, 42);
  GcnModel c = GcnModel::init(cfg, bs, 43);
  CHECK(identical(a.embed.latent, b.embed.latent));
  CHECK(identical(a.dense.latent, b.dense.latent));
  CHECK(identical(a.classifier, b.classifier));
  for (std::size_t i = 0; i < a.attention.size(); ++i)
    CHECK(identical(a.attention[i], b.attention[i]));
  CHECK_FALSE(identical(a.embed.latent, c.embed.latent));
}

TEST_CASE("attention heads start at the adjacency plus small noise") {
  GcnConfig cfg = tiny_config();
  GcnModel m = GcnModel::init(cfg, BandStopConfig{0.3, 1.0}, 7);
  REQUIRE(m.attention.size() == 2);
  double max_dev = 0.0;
  for (const Tensor& head : m.attention)
    for (std::size_t i = 0; i < head.numel(); ++i)
      max_dev = std::max(max_dev, std::abs(head[i] - cfg.adjacency_init[i]));
  CHECK(max_dev > 0.0);       // noise was actually added
  CHECK(max_dev < 0.08);      // and stays at the N(0, 0.01) scale
  CHECK_FALSE(identical(m.attention[0], m.attention[1]));
}

TEST_CASE("latent init respects the fan-in scale") {
  GcnConfig cfg = tiny_config();
  GcnModel m = GcnModel::init(cfg, BandStopConfig{}, 3);
  // uniform in [-0.5, 0.5] / sqrt(fan_in); embed fan-in is s_raw = 4
  double bound = 0.5 / std::sqrt(4.0);
  for (std::size_t i = 0; i < m.embed.latent.numel(); ++i) {
    CHECK(m.embed.latent[i] <= bound);
    CHECK(m.embed.latent[i] >= -bound);
  }
  double dense_bound = 0.5 / std::sqrt(static_cast<double>(cfg.nodes * cfg.filters));
  for (std::size_t i = 0; i < m.dense.latent.numel(); ++i)
    CHECK(std::abs(m.dense.latent[i]) <= dense_bound);
}

TEST_CASE("prunable parameter counts at the reference scale") {
  GcnConfig cfg;
  cfg.nodes = 14;
  cfg.s_raw = 96;  // 3 coords x 32 chunks
  cfg.classes = 5;
  cfg.adjacency_init = chain_adjacency(14);
  GcnModel m = GcnModel::init(cfg, BandStopConfig{}, 0);
  ParamCounts pc = count_params(m);
  CHECK(pc.total == 34304);
  REQUIRE(pc.per_layer.size() == 10);  // embed + 8 conv heads + dense
  CHECK(pc.per_layer.front().first == "embed");
  CHECK(pc.per_layer.front().second == 1536);
  CHECK(pc.per_layer[1].second == 512);  // 16 x 32 per head
  CHECK(pc.per_layer.back().first == "dense");
  CHECK(pc.per_layer.back().second == 28672);
  // attention and classifier stay out of the prunable total
  std::size_t listed = 0;
  for (const auto& [name, count] : pc.per_layer) listed += count;
  CHECK(listed == pc.total);
}

TEST_CASE("trainable parameter order matches the bound leaves") {
  GcnConfig cfg = tiny_config();
  GcnModel m = GcnModel::init(cfg, BandStopConfig{0.2, 1.0}, 11);
  std::vector<Tensor*> params = m.trainable_params();
  // prunable latents first (histogram masking relies on this), then
  // attention heads, classifier last
  REQUIRE(params.size() == 1 + 2 + 1 + 2 + 1);
  CHECK(params[0] == &m.embed.latent);
  CHECK(params[1] == &m.conv[0].latent);
  CHECK(params[2] == &m.conv[1].latent);
  CHECK(params[3] == &m.dense.latent);
  CHECK(params[6] == &m.classifier);

  Graph g;
  BoundModel bm = bind_model(g, m, WeightMode::Plain);
  REQUIRE(bm.leaves.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(identical(g.value(bm.leaves[i]), *params[i]));
  REQUIRE(bm.latent_leaves.size() == m.prunable_latents().size());
}

TEST_CASE("graph forward and direct logits agree bit for bit") {
  GcnConfig cfg = tiny_config();
  GcnModel m = GcnModel::init(cfg, BandStopConfig{0.25, 1.5}, 21);
  GraphSample s = random_sample(cfg, 1, 5);
  for (WeightMode mode : {WeightMode::BandStop, WeightMode::Plain, WeightMode::HardExport}) {
    Tensor direct = m.logits(s, mode);
    Graph g;
    BoundModel bm = bind_model(g, m, mode);
    Tensor via_graph = g.value(forward(g, cfg, bm, s));
    REQUIRE(direct.same_shape(via_graph));
    for (std::size_t i = 0; i < direct.numel(); ++i) CHECK(direct[i] == via_graph[i]);
  }
}

TEST_CASE("weight modes change the forward pass as specified") {
  GcnConfig cfg = tiny_config();
  BandStopConfig bs{0.4, 1.0};
  GcnModel m = GcnModel::init(cfg, bs, 12);
  GraphSample s = random_sample(cfg, 0, 6);
  Tensor plain = m.logits(s, WeightMode::Plain);
  // this seed pair keeps the relu alive; an all-dead forward would make the
  // comparison below vacuous
  bool live = false;
  for (std::size_t i = 0; i < plain.numel(); ++i) live |= plain[i] != 0.0;
  REQUIRE(live);
  Tensor gated = m.logits(s, WeightMode::BandStop);
  CHECK_FALSE(identical(plain, gated));
  // with a = 0 and sigma = 1 the gate is a fixed psi in (1/2, 1) and the
  // hard export prunes nothing
  GcnModel open = GcnModel::init(cfg, BandStopConfig{0.0, 1.0}, 9);
  Tensor exported = hard_export(open.embed.latent, open.bandstop);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < exported.numel(); ++i) zeros += exported[i] == 0.0;
  CHECK(zeros == 0);
}

TEST_CASE("hard export mode runs on thresholded constants") {
  GcnConfig cfg = tiny_config();
  BandStopConfig bs{0.12, 1.0};
  GcnModel m = GcnModel::init(cfg, bs, 33);
  Graph g;
  BoundModel bm = bind_model(g, m, WeightMode::HardExport);
  const Tensor& embed_leaf = g.value(bm.latent_leaves[0]);
  Tensor want = hard_export(m.embed.latent, bs);
  CHECK(identical(embed_leaf, want));
  bool any_zero = false;
  for (std::size_t i = 0; i < want.numel(); ++i) any_zero |= want[i] == 0.0;
  CHECK(any_zero);  // threshold chosen so the tiny model actually prunes
}

TEST_CASE("forward rejects mis-shaped signals") {
  GcnConfig cfg = tiny_config();
  GcnModel m = GcnModel::init(cfg, BandStopConfig{}, 2);
  GraphSample bad;
  bad.node_signal = Tensor({2, 3});
  bad.label = 0;
  CHECK_THROWS_AS(m.logits(bad, WeightMode::Plain), std::invalid_argument);
  Graph g;
  BoundModel bm = bind_model(g, m, WeightMode::Plain);
  CHECK_THROWS_AS(forward(g, cfg, bm, bad), std::invalid_argument);
}

TEST_CASE("cross entropy against hand values") {
  Graph g;
  Var logits = g.param(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  Var ce = cross_entropy(g, logits, 2);
  CHECK(g.value(ce)[0] == doctest::Approx(0.40760596444438013).epsilon(1e-14));
  g.backward(ce);
  Tensor grad = g.grad(logits);
  // softmax minus one-hot
  CHECK(grad[0] == doctest::Approx(0.09003057317038046).epsilon(1e-13));
  CHECK(grad[1] == doctest::Approx(0.24472847105479767).epsilon(1e-13));
  CHECK(grad[2] == doctest::Approx(0.6652409557748219 - 1.0).epsilon(1e-13));

  Graph g2;
  Var flat = g2.param(Tensor({1, 2}, {0.0, 0.0}));
  CHECK(g2.value(cross_entropy(g2, flat, 0))[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("cross entropy is shift-invariant and rejects bad labels") {
  Graph g;
  Var a = g.param(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  Var b = g.param(Tensor({1, 3}, {1001.0, 1002.0, 1003.0}));
  CHECK(g.value(cross_entropy(g, a, 1))[0] ==
        doctest::Approx(g.value(cross_entropy(g, b, 1))[0]).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy(g, a, 3), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(g, a, -1), std::invalid_argument);
}

TEST_CASE("graph_conv needs matching head lists") {
  Graph g;
  Var sig = g.param(Tensor({2, 3}));
  CHECK_THROWS_AS(graph_conv(g, {}, sig, {}), std::invalid_argument);
  Var a = g.param(chain_adjacency(3));
  Var w = g.param(Tensor({2, 2}));
  CHECK_THROWS_AS(graph_conv(g, {a, a}, sig, {w}), std::invalid_argument);
}

TEST_CASE("deeper stacks keep filter-to-filter shapes") {
  GcnConfig cfg = tiny_config();
  cfg.depth = 2;
  GcnModel m = GcnModel::init(cfg, BandStopConfig{}, 4);
  REQUIRE(m.conv.size() == 4);  // depth * heads
  CHECK(m.conv[0].latent.rows() == 2);  // s_emb in
  CHECK(m.conv[2].latent.rows() == 2);  // filters in at block 1
  CHECK(m.conv[2].latent.cols() == 2);
  GraphSample s = random_sample(cfg, 1, 8);
  Tensor out = m.logits(s, WeightMode::Plain);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 2);
}

TEST_CASE("checkpoint round trip is bit exact") {
  GcnConfig cfg = tiny_config();
  GcnModel m = GcnModel::init(cfg, BandStopConfig{0.37, 1.2}, 55);
  Checkpoint ck{m, WeightMode::Plain};
  std::string path = "test_ckpt_roundtrip.bin";
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.weight_mode == WeightMode::Plain);
  CHECK(back.model.bandstop.a == 0.37);
  CHECK(back.model.bandstop.sigma == 1.2);
  CHECK(back.model.config.nodes == cfg.nodes);
  CHECK(back.model.config.classes == cfg.classes);
  CHECK(identical(back.model.embed.latent, m.embed.latent));
  CHECK(identical(back.model.dense.latent, m.dense.latent));
  CHECK(identical(back.model.classifier, m.classifier));
  CHECK(identical(back.model.config.adjacency_init, cfg.adjacency_init));
  REQUIRE(back.model.conv.size() == m.conv.size());
  for (std::size_t i = 0; i < m.conv.size(); ++i) {
    CHECK(back.model.conv[i].name == m.conv[i].name);
    CHECK(identical(back.model.conv[i].latent, m.conv[i].latent));
  }
  for (std::size_t i = 0; i < m.attention.size(); ++i)
    CHECK(identical(back.model.attention[i], m.attention[i]));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects foreign files") {
  std::string path = "test_ckpt_bogus.bin";
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fputs("definitely not a checkpoint", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("no_such_file.bin"), std::runtime_error);
}
