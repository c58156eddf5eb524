#include "pmp/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pmp {

const Graph::Node& Graph::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument("Graph: variable does not belong to this graph");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::push(Tensor value, std::vector<int> inputs, BackwardFn backward, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  n.requires_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

Var Graph::param(Tensor value) { return push(std::move(value), {}, nullptr, true); }

const Tensor& Graph::value(Var v) const { return node(v).value; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad_ready) return n.grad;
  return Tensor::zeros(n.value.shape());
}

Var Graph::make_node(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs_grad = false;
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (Var v : inputs) {
    needs_grad = needs_grad || node(v).requires_grad;
    ids.push_back(v.id);
  }
  return push(std::move(value), std::move(ids), std::move(backward), needs_grad);
}

Var Graph::matmul(Var a, Var b) {
  Tensor out = pmp::matmul(value(a), value(b));
  return make_node(std::move(out), {a, b},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>& in,
                      const std::vector<Tensor*>& gin) {
                     if (gin[0]) {
                       Tensor da = pmp::matmul(g, transposed(*in[1]));
                       for (std::size_t i = 0; i < da.numel(); ++i) (*gin[0])[i] += da[i];
                     }
                     if (gin[1]) {
                       Tensor db = pmp::matmul(transposed(*in[0]), g);
                       for (std::size_t i = 0; i < db.numel(); ++i) (*gin[1])[i] += db[i];
                     }
                   });
}

Var Graph::transpose(Var a) {
  return make_node(transposed(value(a)), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>&,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     Tensor gt = transposed(g);
                     for (std::size_t i = 0; i < gt.numel(); ++i) (*gin[0])[i] += gt[i];
                   });
}

Var Graph::reshape(Var a, std::vector<std::size_t> shape) {
  const Tensor& av = value(a);
  Tensor out(std::move(shape), std::vector<double>(av.data(), av.data() + av.numel()));
  return make_node(std::move(out), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>&,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
                   });
}

namespace {

enum class Pair { Same, ScalarLeft, ScalarRight };

Pair classify(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.same_shape(b)) return Pair::Same;
  if (a.numel() == 1) return Pair::ScalarLeft;
  if (b.numel() == 1) return Pair::ScalarRight;
  throw std::invalid_argument(std::string(opname) + ": shapes " + a.shape_str() + " and " +
                              b.shape_str() + " are neither equal nor scalar-broadcastable");
}

}  // namespace

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  const Pair p = classify(A, B, "add");
  Tensor out = (p == Pair::ScalarLeft) ? B : A;
  if (p == Pair::Same) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = A[i] + B[i];
  } else if (p == Pair::ScalarLeft) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = A[0] + B[i];
  } else {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = A[i] + B[0];
  }
  return make_node(std::move(out), {a, b},
                   [p](const Tensor&, const Tensor& g, const std::vector<const Tensor*>&,
                       const std::vector<Tensor*>& gin) {
                     for (int side = 0; side < 2; ++side) {
                       Tensor* t = gin[side];
                       if (!t) continue;
                       const bool scalar_side = (side == 0 && p == Pair::ScalarLeft) ||
                                                (side == 1 && p == Pair::ScalarRight);
                       if (scalar_side) {
                         double s = 0.0;
                         for (std::size_t i = 0; i < g.numel(); ++i) s += g[i];
                         (*t)[0] += s;
                       } else {
                         for (std::size_t i = 0; i < g.numel(); ++i) (*t)[i] += g[i];
                       }
                     }
                   });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  const Pair p = classify(A, B, "mul");
  Tensor out = (p == Pair::ScalarLeft) ? B : A;
  if (p == Pair::Same) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = A[i] * B[i];
  } else if (p == Pair::ScalarLeft) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = A[0] * B[i];
  } else {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = A[i] * B[0];
  }
  return make_node(std::move(out), {a, b},
                   [p](const Tensor&, const Tensor& g, const std::vector<const Tensor*>& in,
                       const std::vector<Tensor*>& gin) {
                     const Tensor& A = *in[0];
                     const Tensor& B = *in[1];
                     if (gin[0]) {
                       if (p == Pair::ScalarLeft) {
                         double s = 0.0;
                         for (std::size_t i = 0; i < g.numel(); ++i) s += g[i] * B[i];
                         (*gin[0])[0] += s;
                       } else if (p == Pair::ScalarRight) {
                         for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * B[0];
                       } else {
                         for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * B[i];
                       }
                     }
                     if (gin[1]) {
                       if (p == Pair::ScalarRight) {
                         double s = 0.0;
                         for (std::size_t i = 0; i < g.numel(); ++i) s += g[i] * A[i];
                         (*gin[1])[0] += s;
                       } else if (p == Pair::ScalarLeft) {
                         for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[i] += g[i] * A[0];
                       } else {
                         for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[i] += g[i] * A[i];
                       }
                     }
                   });
}

Var Graph::add_scalar(Var a, double c) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c;
  return make_node(std::move(out), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>&,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
                   });
}

Var Graph::mul_scalar(Var a, double c) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  return make_node(std::move(out), {a},
                   [c](const Tensor&, const Tensor& g, const std::vector<const Tensor*>&,
                       const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += c * g[i];
                   });
}

Var Graph::neg(Var a) { return mul_scalar(a, -1.0); }

Var Graph::exp(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
  return make_node(std::move(out), {a},
                   [](const Tensor& y, const Tensor& g, const std::vector<const Tensor*>&,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * y[i];
                   });
}

Var Graph::log(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (!(out[i] > 0.0))
      throw std::domain_error("log: non-positive entry " + std::to_string(out[i]));
    out[i] = std::log(out[i]);
  }
  return make_node(std::move(out), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>& in,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     const Tensor& x = *in[0];
                     for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] / x[i];
                   });
}

Var Graph::square(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
  return make_node(std::move(out), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>& in,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     const Tensor& x = *in[0];
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       (*gin[0])[i] += 2.0 * x[i] * g[i];
                   });
}

Var Graph::relu(Var a) {
  Tensor out = pmp::relu(value(a));
  return make_node(std::move(out), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>& in,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     const Tensor& x = *in[0];
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       if (x[i] > 0.0) (*gin[0])[i] += g[i];
                   });
}

Var Graph::sum(Var a) {
  double s = 0.0;
  const Tensor& A = value(a);
  for (std::size_t i = 0; i < A.numel(); ++i) s += A[i];
  return make_node(Tensor::scalar(s), {a},
                   [](const Tensor&, const Tensor& g, const std::vector<const Tensor*>&,
                      const std::vector<Tensor*>& gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < gin[0]->numel(); ++i) (*gin[0])[i] += g[0];
                   });
}

void Graph::backward(Var root) {
  const Node& r = node(root);
  if (r.value.numel() != 1)
    throw std::invalid_argument("backward: root must be a single-element tensor, have " +
                                r.value.shape_str());
  for (Node& n : nodes_) n.grad_ready = false;

  Node& rn = nodes_[static_cast<std::size_t>(root.id)];
  rn.grad = Tensor::full(rn.value.shape(), 1.0);
  rn.grad_ready = true;

  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_ready || !n.requires_grad || !n.backward) continue;
    std::vector<const Tensor*> in_vals;
    std::vector<Tensor*> in_grads;
    in_vals.reserve(n.inputs.size());
    in_grads.reserve(n.inputs.size());
    for (int in : n.inputs) {
      Node& m = nodes_[static_cast<std::size_t>(in)];
      in_vals.push_back(&m.value);
      if (m.requires_grad) {
        if (!m.grad_ready) {
          m.grad = Tensor::zeros(m.value.shape());
          m.grad_ready = true;
        }
        in_grads.push_back(&m.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.backward(n.value, n.grad, in_vals, in_grads);
  }
}

}  // namespace pmp
