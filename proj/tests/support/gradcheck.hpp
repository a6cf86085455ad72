#pragma once

// Central finite-difference oracle for autodiff gradients. Independent of the
// backward implementations: it only ever evaluates forward passes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pnerf/numerics/ops.hpp"
#include "pnerf/numerics/rng.hpp"

namespace pnerf::testing {

struct GradCheckResult {
  double worst_rel = 0.0;  // worst relative error among entries with |grad| >= 1e-6
  double worst_abs = 0.0;  // worst absolute error among entries with |grad| < 1e-6
  std::size_t checked = 0;
  std::size_t refined = 0;  // entries whose stencil straddled a kink and was shrunk
  std::string worst_where;

  bool ok(double rel_tol = 1e-4, double abs_tol = 1e-3) const {
    return worst_rel <= rel_tol && worst_abs <= abs_tol;
  }
};

// `fn` must build a scalar from the current values of `inputs`. At most
// `max_entries` entries per input are probed (chosen by `rng` when the input
// is larger).
//
// With `refine_kinks`, an entry whose central differences at `step` and
// `step / 2` differ by more than 1e-6 max(|D|, 1) is taken to straddle a
// rectifier kink (a smooth function agrees to O(step^2)); the step is then
// divided by 10, at most three times, until the two agree.
inline GradCheckResult gradcheck(const std::function<num::Tensor()>& fn, std::vector<num::Tensor> inputs,
                                 num::Rng& rng, std::size_t max_entries = 40, double step = 1e-5,
                                 bool refine_kinks = false) {
  for (auto& t : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  {
    num::Tape tape;
    num::Tape::Scope scope(tape);
    num::backward(fn());
  }
  GradCheckResult res;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    const auto analytic = t.grad();
    std::vector<std::size_t> entries(t.numel());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (entries.size() > max_entries) {
      for (std::size_t i = 0; i < max_entries; ++i) std::swap(entries[i], entries[i + rng.below(entries.size() - i)]);
      entries.resize(max_entries);
    }
    for (std::size_t e : entries) {
      auto vals = t.mutable_values();
      const double orig = vals[e];
      const auto central = [&](double h) {
        vals[e] = orig + h;
        const double fp = fn().item();
        vals[e] = orig - h;
        const double fm = fn().item();
        vals[e] = orig;
        return (fp - fm) / (2.0 * h);
      };
      double h = step;
      double numeric = central(h);
      if (refine_kinks) {
        for (int shrink = 0; shrink < 3; ++shrink) {
          const double half = central(h / 2.0);
          if (std::abs(half - numeric) <= 1e-6 * std::max({std::abs(half), std::abs(numeric), 1.0})) break;
          if (shrink == 0) ++res.refined;
          h /= 10.0;
          numeric = central(h);
        }
      }
      const double a = analytic[e];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const std::string where = "input " + std::to_string(ti) + " entry " + std::to_string(e) + " analytic " +
                                std::to_string(a) + " numeric " + std::to_string(numeric);
      if (scale < 1e-6) {
        const double err = std::abs(a - numeric);
        if (err > res.worst_abs) res.worst_abs = err;
      } else {
        const double err = std::abs(a - numeric) / scale;
        if (err > res.worst_rel) {
          res.worst_rel = err;
          res.worst_where = where;
        }
      }
      ++res.checked;
    }
    t.zero_grad();
  }
  return res;
}

inline num::Tensor random_tensor(num::Shape shape, num::Rng& rng, double scale = 1.0) {
  std::vector<double> v(num::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return num::Tensor::from(std::move(shape), std::move(v));
}

}  // namespace pnerf::testing
