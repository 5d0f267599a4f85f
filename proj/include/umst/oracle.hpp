// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "umst/batch.hpp"
#include "umst/schedule.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace umst {

struct GmComponent {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    int label = 0;
    double weight = 0.0;
};

/// Class posterior at a point: probabilities, entropy (nats) and the
/// analytic entropy gradient with respect to the point.
struct PosteriorReport {
    Eigen::VectorXd probs;
    double entropy = 0.0;
    Eigen::VectorXd entropy_grad;
};

/// Closed-form Gaussian-mixture world model.
///
/// Scores, class posteriors, posterior entropies and their input gradients
/// are all analytic, which makes this the verification ground truth for the
/// guidance formulas. Densities and responsibilities are evaluated in
/// log-space (log-sum-exp) so far-tail queries do not underflow. Immutable
/// after construction; Cholesky factors are computed once and cached.
class GaussianMixtureOracle {
public:
    explicit GaussianMixtureOracle(std::vector<GmComponent> components);

    int dim() const { return dim_; }
    int num_classes() const { return num_classes_; }
    const std::vector<GmComponent>& components() const { return components_; }

    double log_density(const Eigen::VectorXd& x) const;

    /// Gradient of the log mixture density.
    Eigen::VectorXd score(const Eigen::VectorXd& x) const;

    /// Mixture diffused by the forward process to step t: means scaled by
    /// sqrt(abar_t), covariances abar_t * Sigma + (1 - abar_t) * I.
    GaussianMixtureOracle diffused(const NoiseSchedule& sched, int t) const;

    /// Exact noise predictor -sqrt(1 - abar_t) * score of the diffused
    /// mixture, evaluated at x_t.
    Eigen::VectorXd exact_epsilon(const NoiseSchedule& sched, const Eigen::VectorXd& x_t,
                                  int t) const;

    /// Bayes class posterior with entropy and analytic entropy gradient.
    /// Classes with probability below 1e-300 contribute zero to both the
    /// entropy and its gradient (the p*log p limit).
    PosteriorReport posterior(const Eigen::VectorXd& x) const;

    /// Gradient of log p(class = c | x).
    Eigen::VectorXd class_log_posterior_grad(const Eigen::VectorXd& x, int c) const;

    /// i.i.d. labelled draws; deterministic for a given seed.
    SampleBatch sample_data(int n, std::uint64_t seed) const;

    /// d = 2, three unit-covariance classes at 120 degree spacing, radius 4,
    /// equal weights. The smallest world with multi-class boundaries.
    static GaussianMixtureOracle default_world();

private:
    struct Factored {
        Eigen::LLT<Eigen::MatrixXd> llt;
        double log_norm = 0.0; // -0.5 log det(Sigma) - d/2 log(2 pi)
    };

    // log weight + log N(x; mu_k, Sigma_k) per component.
    void component_log_terms(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
    // Mixture responsibilities (normalized, via log-sum-exp); returns log density.
    double responsibilities(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;

    std::vector<GmComponent> components_;
    std::vector<Factored> factored_;
    int dim_ = 0;
    int num_classes_ = 0;
};

} // namespace umst
