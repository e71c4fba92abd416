#include "av/gradcheck.hpp"

#include <cmath>

#include "av/common.hpp"

namespace av {

namespace {

double eval_at(const std::vector<Tensor>& points, const ScalarBuilder& f,
               double* kink_margin) {
  Graph g;
  std::vector<Var> leaves;
  leaves.reserve(points.size());
  for (const Tensor& p : points) leaves.push_back(g.constant(p));
  Var root = f(g, leaves);
  check(root.value().size() == 1, "finite_difference_check: objective is not scalar");
  double v = root.value()[0];
  check(std::isfinite(v), "finite_difference_check: non-finite objective value");
  if (kink_margin) *kink_margin = std::min(*kink_margin, g.kink_margin());
  return v;
}

}  // namespace

GradCheckReport finite_difference_check(const std::vector<Tensor>& points,
                                        const ScalarBuilder& f, double h, double tol) {
  check(h > 0.0, "finite_difference_check: h must be positive");
  GradCheckReport rep;

  // analytic pass
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> leaves;
    for (const Tensor& p : points) leaves.push_back(g.input(p));
    Var root = f(g, leaves);
    check(root.value().size() == 1, "finite_difference_check: objective is not scalar");
    check(std::isfinite(root.value()[0]),
          "finite_difference_check: non-finite objective value");
    g.backward(root);
    rep.kink_margin = std::min(rep.kink_margin, g.kink_margin());
    for (const Var& leaf : leaves) analytic.push_back(leaf.grad());
  }

  std::vector<Tensor> probe = points;
  for (size_t li = 0; li < points.size(); ++li) {
    for (size_t ci = 0; ci < points[li].size(); ++ci) {
      double orig = probe[li][ci];
      probe[li][ci] = orig + h;
      double fp = eval_at(probe, f, &rep.kink_margin);
      probe[li][ci] = orig - h;
      double fm = eval_at(probe, f, &rep.kink_margin);
      probe[li][ci] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double a = analytic[li][ci];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-3});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_leaf = li;
        rep.worst_coord = ci;
        rep.analytic = a;
        rep.numeric = numeric;
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace av
