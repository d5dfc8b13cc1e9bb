#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "mmlm/adamw.hpp"
#include "mmlm/errors.hpp"
#include "mmlm/tensor.hpp"

// Central finite-difference gradient verification. The loss callable is
// invoked as loss(true) to populate analytic gradients (forward + backward
// into the parameters' grad buffers) and as loss(false) for plain forward
// evaluations. It must be a pure function of the parameter values; the
// harness proves that to itself by evaluating the baseline twice and
// requiring bitwise equality before trusting any finite difference.

namespace mmlm {

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    // Relative error denominator is max(|analytic|, |numeric|, denom_floor),
    // so tiny gradients are judged on an absolute scale of tol*denom_floor.
    double denom_floor = 1e-4;
    // When nonempty, only parameters whose name appears here are checked.
    std::vector<std::string> only;
};

struct GradCheckEntry {
    std::string name;
    double max_rel = 0.0;
    size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    size_t checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel = 0.0;
    std::string worst_param;
    size_t worst_index = 0;
    size_t total_checked = 0;

    bool passed(double tol) const { return max_rel < tol; }
};

template <class T, class LossFn>
GradCheckReport grad_check(LossFn&& loss, ParamList<T>& params, const GradCheckOptions& opt = {}) {
    auto selected = [&](const std::string& name) {
        if (opt.only.empty()) return true;
        for (const auto& n : opt.only)
            if (n == name) return true;
        return false;
    };

    const double base_a = static_cast<double>(loss(false));
    const double base_b = static_cast<double>(loss(false));
    if (std::memcmp(&base_a, &base_b, sizeof(double)) != 0)
        throw NumericError("loss is not deterministic: two identical evaluations disagree");
    if (!std::isfinite(base_a)) throw NumericError("loss is not finite at the checked point");

    for (auto& p : params) p.value.zero_grad();
    (void)loss(true);

    GradCheckReport report;
    const T eps = static_cast<T>(opt.eps);
    for (auto& p : params) {
        if (!p.value.requires_grad())
            throw DataError("grad check requires gradients on parameter " + p.name);
        if (!selected(p.name)) continue;
        GradCheckEntry entry;
        entry.name = p.name;
        entry.checked = p.value.size();
        for (size_t i = 0; i < p.value.size(); ++i) {
            const T orig = p.value.at(i);
            p.value.at(i) = orig + eps;
            const double fp = static_cast<double>(loss(false));
            p.value.at(i) = orig - eps;
            const double fm = static_cast<double>(loss(false));
            p.value.at(i) = orig;
            const double numeric = (fp - fm) / (2.0 * opt.eps);
            const double analytic = static_cast<double>(p.value.grad()[i]);
            const double denom = std::max({std::fabs(analytic), std::fabs(numeric), opt.denom_floor});
            const double rel = std::fabs(analytic - numeric) / denom;
            if (rel > entry.max_rel) {
                entry.max_rel = rel;
                entry.worst_index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
        }
        report.total_checked += entry.checked;
        if (entry.max_rel > report.max_rel) {
            report.max_rel = entry.max_rel;
            report.worst_param = entry.name;
            report.worst_index = entry.worst_index;
        }
        report.per_param.push_back(std::move(entry));
    }
    return report;
}

} // namespace mmlm
