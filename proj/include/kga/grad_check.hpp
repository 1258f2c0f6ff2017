#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kga/param_store.hpp"

namespace kga {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<GradCheckEntry> entries;

    bool passed() const;
    double max_rel_error() const;
    std::string summary() const;
};

// Central-difference verification of hand-derived gradients.
//
// For each non-frozen tensor with a supplied analytic gradient, perturbs
// every element by +/- eps and compares (f+ - f-) / 2 eps against the
// analytic value. Relative error is |a - n| / max(|a| + |n|, 1e-6); the
// floor makes near-zero gradients an absolute comparison, below the noise
// of the differences themselves. The report keeps the max per tensor. The
// loss must be deterministic: it is evaluated twice at the base point and
// any disagreement is a contract violation.
GradCheckReport grad_check(const std::function<double(const ParamStore&)>& loss,
                           const ParamStore& params, const ParamStore& analytic_grads,
                           double eps, double tol);

}  // namespace kga
