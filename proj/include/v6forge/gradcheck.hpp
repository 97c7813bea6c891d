#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "v6forge/autodiff.hpp"

namespace v6forge::num {

struct GradCheckOptions {
  int max_coords = 200;    // coordinates to probe (all of them if fewer exist)
  double step = 1e-6;      // central-difference step
  double tol = 1e-4;       // relative-error threshold
  std::uint64_t seed = 1;  // coordinate subsampling
};

struct GradCheckResult {
  bool pass = false;
  int checked = 0;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_coord = 0;
};

/// Central-difference check of analytic gradients. `loss` evaluates the
/// objective at the current parameter values; `fill_grads` must zero the
/// parameter gradients, run forward+backward once, and leave analytic
/// gradients in Parameter::grad.
inline GradCheckResult check_gradients(const std::vector<Parameter*>& params,
                                       const std::function<double()>& loss,
                                       const std::function<void()>& fill_grads,
                                       const GradCheckOptions& opts = {}) {
  if (params.empty()) throw ParamError("gradient check needs at least one parameter");
  fill_grads();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) {
    if (p->grad.size() != p->value.size())
      throw StateError("parameter \"" + p->name + "\" has no gradient after fill_grads");
    analytic.push_back(p->grad);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t pi = 0; pi < params.size(); ++pi)
    for (std::size_t ci = 0; ci < params[pi]->value.size(); ++ci) coords.emplace_back(pi, ci);
  if (static_cast<int>(coords.size()) > opts.max_coords) {
    rng::Engine eng = rng::engine(opts.seed, 0x6c0de);
    rng::shuffle(coords, eng);
    coords.resize(static_cast<std::size_t>(opts.max_coords));
  }

  GradCheckResult res;
  for (const auto& [pi, ci] : coords) {
    Parameter* p = params[pi];
    const double original = p->value[ci];
    p->value[ci] = original + opts.step;
    const double up = loss();
    p->value[ci] = original - opts.step;
    const double down = loss();
    p->value[ci] = original;
    const double fd = (up - down) / (2.0 * opts.step);
    const double a = analytic[pi][ci];
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4});
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_param = p->name;
      res.worst_coord = ci;
    }
    ++res.checked;
  }
  res.pass = res.max_rel_err < opts.tol;
  return res;
}

}  // namespace v6forge::num
