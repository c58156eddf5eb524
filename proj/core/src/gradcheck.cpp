#include "pmp/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace pmp {

double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& f,
                  const std::vector<Tensor>& params, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  if (params.empty()) throw std::invalid_argument("grad_check: no parameters given");

  auto build = [&](const std::vector<Tensor>& ps, Graph& g, std::vector<Var>& vars) {
    vars.clear();
    for (const Tensor& p : ps) vars.push_back(g.param(p));
    Var root = f(g, vars);
    if (g.value(root).numel() != 1)
      throw std::invalid_argument("grad_check: f must return a single-element tensor");
    return root;
  };

  Graph g;
  std::vector<Var> vars;
  Var root = build(params, g, vars);
  g.backward(root);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Var v : vars) analytic.push_back(g.grad(v));

  auto eval = [&](const std::vector<Tensor>& ps) {
    Graph gg;
    std::vector<Var> vs;
    Var r = build(ps, gg, vs);
    return gg.value(r)[0];
  };

  std::vector<Tensor> work = params;
  double worst = 0.0;
  for (std::size_t pi = 0; pi < work.size(); ++pi) {
    for (std::size_t i = 0; i < work[pi].numel(); ++i) {
      const double orig = work[pi][i];
      work[pi][i] = orig + step;
      const double fp = eval(work);
      work[pi][i] = orig - step;
      const double fm = eval(work);
      work[pi][i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double an = analytic[pi][i];
      const double err = std::abs(an - numeric) / std::max(1.0, std::abs(an));
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace pmp
