#include "kga/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kga/errors.hpp"

namespace kga {

bool GradCheckReport::passed() const {
    for (const auto& e : entries) {
        if (!(e.max_rel_error <= tolerance)) return false;
    }
    return true;
}

double GradCheckReport::max_rel_error() const {
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
    return worst;
}

std::string GradCheckReport::summary() const {
    std::string out;
    char line[256];
    for (const auto& e : entries) {
        std::snprintf(line, sizeof(line), "%-12s max_rel_err=%.3e (analytic=%.6e numeric=%.6e)\n",
                      e.name.c_str(), e.max_rel_error, e.analytic_at_worst, e.numeric_at_worst);
        out += line;
    }
    return out;
}

GradCheckReport grad_check(const std::function<double(const ParamStore&)>& loss,
                           const ParamStore& params, const ParamStore& analytic_grads,
                           double eps, double tol) {
    if (!(eps >= 1e-6 && eps <= 1e-4)) {
        throw InvalidArgument("grad_check: eps must lie in [1e-6, 1e-4]");
    }
    const double base = loss(params);
    const double base_again = loss(params);
    if (base != base_again) {
        throw ContractViolation("grad_check: loss is not deterministic");
    }

    GradCheckReport report;
    report.tolerance = tol;
    ParamStore work = params;

    for (const auto& name : analytic_grads.names()) {
        if (!params.has(name)) throw InvalidArgument("grad_check: unknown tensor " + name);
        const Tensor& analytic = analytic_grads.get(name);
        if (!analytic.same_shape(params.get(name))) {
            throw InvalidArgument("grad_check: gradient shape mismatch for " + name);
        }
        GradCheckEntry entry;
        entry.name = name;
        Tensor& t = work.get(name);
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double saved = t.values[i];
            t.values[i] = saved + eps;
            const double up = loss(work);
            t.values[i] = saved - eps;
            const double down = loss(work);
            t.values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic.values[i];
            // the 1e-6 denominator floor turns the check absolute for
            // gradients below the central-difference noise floor
            const double rel = std::abs(a - numeric) /
                               std::max(std::abs(a) + std::abs(numeric), 1e-6);
            if (rel >= entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.analytic_at_worst = a;
                entry.numeric_at_worst = numeric;
            }
        }
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace kga
