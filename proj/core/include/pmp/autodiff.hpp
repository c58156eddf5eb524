#pragma once

#include <functional>
#include <vector>

#include "pmp/tensor.hpp"

namespace pmp {

// Handle into a Graph's node tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. Each op records its inputs and a backward
// rule; backward() walks the tape in reverse creation order (creation order is
// topological by construction) and accumulates gradients into every node that
// transitively depends on a param leaf.
//
// Graphs are independent of one another: separate Graph instances may be used
// from separate threads without synchronization.
class Graph {
 public:
  // out_value/out_grad belong to the node itself; in_grads entries are null
  // for inputs that do not require gradients.
  using BackwardFn = std::function<void(const Tensor& out_value, const Tensor& out_grad,
                                        const std::vector<const Tensor*>& in_values,
                                        const std::vector<Tensor*>& in_grads)>;

  Var constant(Tensor value);  // leaf, no gradient tracking
  Var param(Tensor value);     // leaf, receives gradient

  const Tensor& value(Var v) const;
  // Gradient accumulated by the last backward(); zero tensor for nodes the
  // root does not depend on.
  Tensor grad(Var v) const;

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, std::vector<std::size_t> shape);

  // Elementwise ops. add/mul accept equal shapes or a single-element operand
  // on either side (scalar broadcast); no other broadcasting exists.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_scalar(Var a, double c);
  Var mul_scalar(Var a, double c);
  Var neg(Var a);
  Var exp(Var a);
  Var log(Var a);  // domain error on non-positive entries
  Var square(Var a);
  Var relu(Var a);
  Var sum(Var a);  // reduce to shape {1}

  // Escape hatch for fused ops (band-stop gate, soft histogram, losses).
  Var make_node(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  // Root must be a single-element tensor.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool grad_ready = false;
  };

  const Node& node(Var v) const;
  Var push(Tensor value, std::vector<int> inputs, BackwardFn backward, bool needs_grad);

  std::vector<Node> nodes_;
};

}  // namespace pmp
