// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace umst {

enum class ScheduleKind { linear, cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Discrete diffusion variance schedule.
///
/// Step indices are 1-based: t in [1, T] addresses the stored sequences,
/// t = 0 denotes clean data and alpha_bar(0) == 1. All arithmetic is in
/// 64-bit floating point; the cumulative products lose too much precision
/// in 32-bit over long schedules.
class NoiseSchedule {
public:
    NoiseSchedule(ScheduleKind kind, std::vector<double> betas,
                  double beta_min, double beta_max);

    ScheduleKind kind() const { return kind_; }
    int steps() const { return static_cast<int>(betas_.size()); }
    double beta_min() const { return beta_min_; }
    double beta_max() const { return beta_max_; }

    double beta(int t) const;       // t in [1, T]
    double alpha(int t) const;      // 1 - beta_t
    double alpha_bar(int t) const;  // t in [0, T], alpha_bar(0) = 1

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alphas() const { return alphas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

private:
    ScheduleKind kind_;
    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
    double beta_min_;
    double beta_max_;
};

/// Variance-preserving discretization coefficients at step t:
/// drift_scale = -beta_t / 2 (per unit x, per step), diffusion = sqrt(beta_t).
struct SdeCoefficients {
    double drift_scale;
    double diffusion;
};

/// Builds a noise schedule.
///
/// linear: betas evenly spaced on [beta_min, beta_max] (endpoints included).
/// cosine: alpha_bar_t follows the squared-cosine profile with offset
/// s = 0.008; betas are derived as 1 - abar_t/abar_{t-1} and clamped to
/// (0, 0.999], then the cumulative products are rebuilt from the clamped
/// betas so that abar_t / abar_{t-1} == alpha_t holds exactly.
NoiseSchedule make_schedule(ScheduleKind kind, int steps, double beta_min, double beta_max);

/// Forward-process draw x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Eigen::VectorXd q_sample(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                         const NoiseSchedule& sched);

SdeCoefficients sde_coefficients(const NoiseSchedule& sched, int t);

} // namespace umst
