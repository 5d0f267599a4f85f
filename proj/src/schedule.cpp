// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/schedule.hpp"

#include "umst/common.hpp"

#include <cmath>

namespace umst {

std::string to_string(ScheduleKind kind)
{
    return kind == ScheduleKind::linear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& name)
{
    if (name == "linear") {
        return ScheduleKind::linear;
    }
    if (name == "cosine") {
        return ScheduleKind::cosine;
    }
    throw ManifestError("unknown schedule kind: " + name);
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, std::vector<double> betas,
                             double beta_min, double beta_max)
    : kind_(kind), betas_(std::move(betas)), beta_min_(beta_min), beta_max_(beta_max)
{
    alphas_.resize(betas_.size());
    alpha_bars_.resize(betas_.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < betas_.size(); ++i) {
        const double b = betas_[i];
        if (!(b > 0.0 && b < 1.0)) {
            throw NumericalError("beta out of (0,1) at step " + std::to_string(i + 1));
        }
        alphas_[i] = 1.0 - b;
        prod *= alphas_[i];
        alpha_bars_[i] = prod;
    }
    if (!betas_.empty() && !(alpha_bars_.back() > 0.0)) {
        throw NumericalError("alpha_bar underflowed to zero");
    }
}

double NoiseSchedule::beta(int t) const
{
    if (t < 1 || t > steps()) {
        throw NumericalError("schedule step out of range: t=" + std::to_string(t));
    }
    return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const
{
    if (t < 1 || t > steps()) {
        throw NumericalError("schedule step out of range: t=" + std::to_string(t));
    }
    return alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const
{
    if (t == 0) {
        return 1.0;
    }
    if (t < 0 || t > steps()) {
        throw NumericalError("schedule step out of range: t=" + std::to_string(t));
    }
    return alpha_bars_[static_cast<std::size_t>(t - 1)];
}

NoiseSchedule make_schedule(ScheduleKind kind, int steps, double beta_min, double beta_max)
{
    if (steps < 2) {
        throw ManifestError("schedule needs at least 2 steps");
    }
    if (!std::isfinite(beta_min) || !std::isfinite(beta_max) ||
        !(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        throw ManifestError("beta bounds must satisfy 0 < beta_min <= beta_max < 1");
    }

    std::vector<double> betas(static_cast<std::size_t>(steps));
    if (kind == ScheduleKind::linear) {
        for (int t = 1; t <= steps; ++t) {
            betas[static_cast<std::size_t>(t - 1)] =
                beta_min + (beta_max - beta_min) * static_cast<double>(t - 1) /
                               static_cast<double>(steps - 1);
        }
    } else {
        const double s = 0.008;
        const auto profile = [&](double t) {
            const double c = std::cos((t / steps + s) / (1.0 + s) * M_PI / 2.0);
            return c * c;
        };
        const double norm = profile(0.0);
        double prev = 1.0;
        for (int t = 1; t <= steps; ++t) {
            const double abar = profile(static_cast<double>(t)) / norm;
            double b = 1.0 - abar / prev;
            b = std::min(b, 0.999);
            b = std::max(b, 1e-12);
            betas[static_cast<std::size_t>(t - 1)] = b;
            prev *= 1.0 - b;
        }
    }
    return NoiseSchedule(kind, std::move(betas), beta_min, beta_max);
}

Eigen::VectorXd q_sample(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                         const NoiseSchedule& sched)
{
    if (x0.size() != eps.size()) {
        throw NumericalError("q_sample: x0 and eps dimension mismatch");
    }
    const double abar = sched.alpha_bar(t);
    return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
}

SdeCoefficients sde_coefficients(const NoiseSchedule& sched, int t)
{
    const double b = sched.beta(t);
    return SdeCoefficients{-b / 2.0, std::sqrt(b)};
}

} // namespace umst
