#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sipmask/autodiff.hpp"

namespace sipmask {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0;
  double max_abs_err = 0;
  bool ok = false;
};

// Central-difference check of a scalar-valued closure against the tape
// gradient. 64-bit only; relative error floored at 1e-4 magnitude so
// near-zero gradients are compared absolutely at that scale.
inline GradCheckReport grad_check(
    const std::string& name,
    const std::function<VarD(const std::vector<VarD>&)>& fn,
    std::vector<TensorD> inputs, double eps = 1e-5, double tol = 1e-4) {
  GradCheckReport rep;
  rep.name = name;

  std::vector<VarD> leaves;
  leaves.reserve(inputs.size());
  for (auto& t : inputs) leaves.push_back(make_leaf<double>(t, true));

  VarD out = fn(leaves);
  SIP_CHECK(out->value.size() == 1, "grad_check closure must be scalar");
  backward(out);
  for (auto& l : leaves)
    SIP_CHECK(l->grad.size() == 0 || l->grad.all_finite(),
              "non-finite gradient in " << name);

  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& base = leaves[li]->value;
    TensorD analytic = leaves[li]->grad.size() == base.size()
                           ? leaves[li]->grad
                           : TensorD(base.shape());
    for (size_t i = 0; i < base.size(); ++i) {
      const double orig = base[i];
      auto eval = [&](double v) {
        std::vector<VarD> probe;
        probe.reserve(leaves.size());
        for (size_t lj = 0; lj < leaves.size(); ++lj) {
          TensorD t = leaves[lj]->value;
          if (lj == li) t[i] = v;
          probe.push_back(make_constant<double>(std::move(t)));
        }
        return fn(probe)->value[0];
      };
      const double fp = eval(orig + eps);
      const double fm = eval(orig - eps);
      const double numeric = (fp - fm) / (2 * eps);
      const double a = analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      rep.max_rel_err = std::max(rep.max_rel_err, abs_err / denom);
    }
  }
  rep.ok = rep.max_rel_err <= tol && std::isfinite(rep.max_rel_err);
  return rep;
}

// Registered checks covering every differentiable op and loss term; used by
// the CLI gradcheck command and the acceptance suite.
std::vector<GradCheckReport> run_all_grad_checks();

}  // namespace sipmask
