#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tvgnn/tape.hpp"

namespace tvgnn {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

// Central-difference check of reverse-mode gradients.
//
// `f(bool with_grad)` must rebuild the computation from the parameters'
// current values and return the loss; when `with_grad` is true it must also
// run Tape::backward so every parameter's grad field is filled. Every entry
// of every parameter is perturbed by +/- h and compared against the analytic
// gradient with error |a - fd| / max(1, |a|, |fd|). Parameters in the list
// must be learnable; frozen ones record zero gradients by design.
template <typename F>
std::vector<GradCheckEntry> gradient_check(F&& f, const std::vector<Parameter*>& params,
                                           double h = 1e-5) {
  f(true);
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  std::vector<GradCheckEntry> report;
  report.reserve(params.size());
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    require(analytic[pi].same_shape(p.value),
            "gradient_check: no gradient recorded for " + p.name);
    GradCheckEntry entry{p.name, 0.0};
    for (size_t i = 0; i < p.value.v.size(); ++i) {
      const double orig = p.value.v[i];
      p.value.v[i] = orig + h;
      const double up = f(false);
      p.value.v[i] = orig - h;
      const double down = f(false);
      p.value.v[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi].v[i];
      const double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      entry.max_rel_err = std::max(entry.max_rel_err, err);
    }
    report.push_back(std::move(entry));
  }
  return report;
}

inline double worst_gradient_error(const std::vector<GradCheckEntry>& report) {
  double worst = 0.0;
  for (const auto& e : report) worst = std::max(worst, e.max_rel_err);
  return worst;
}

}  // namespace tvgnn
