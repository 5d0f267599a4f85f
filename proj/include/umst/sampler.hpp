// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "umst/batch.hpp"
#include "umst/oracle.hpp"
#include "umst/schedule.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace umst {

/// Noise predictor eps(x_t, y, t). Implementations must be deterministic and
/// safe for concurrent read-only evaluation.
class EpsilonModel {
public:
    virtual ~EpsilonModel() = default;
    virtual Eigen::VectorXd predict(const Eigen::VectorXd& x_t, std::optional<int> y,
                                    int t) const = 0;
    virtual int dim() const = 0;
};

/// Time-conditioned class-posterior provider ("the classifier"). Gradients
/// may be analytic (oracle) or absent, in which case the sampler falls back
/// to finite differences over posterior_at.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual PosteriorReport posterior_at(const Eigen::VectorXd& x, int t) const = 0;
    virtual int num_classes() const = 0;

    virtual bool has_analytic_gradients() const { return false; }
    virtual Eigen::VectorXd log_posterior_grad(const Eigen::VectorXd& x, int y, int t) const;
    virtual Eigen::VectorXd entropy_grad(const Eigen::VectorXd& x, int t) const;
};

enum class GuidanceMode { none, classifier, uncertainty };
enum class GradientSource { analytic, finite_difference };

std::string to_string(GuidanceMode mode);
std::string to_string(GradientSource source);
GradientSource gradient_source_from_string(const std::string& name);

struct GuidanceSpec {
    GuidanceMode mode = GuidanceMode::none;
    double scale = 0.0;
    GradientSource gradient_source = GradientSource::analytic;
};

/// Exact-epsilon model backed by a mixture oracle. Diffused mixtures for all
/// steps are factored once up front; prediction ignores the class id (the
/// oracle epsilon is the unconditional score form).
class OracleEpsilonModel : public EpsilonModel {
public:
    OracleEpsilonModel(const GaussianMixtureOracle& oracle, const NoiseSchedule& sched);
    Eigen::VectorXd predict(const Eigen::VectorXd& x_t, std::optional<int> y,
                            int t) const override;
    int dim() const override { return dim_; }

private:
    std::vector<GaussianMixtureOracle> diffused_; // index t in [0, T]
    std::vector<double> sqrt_one_minus_abar_;
    int dim_;
};

/// Bayes classifier backed by a mixture oracle, with analytic gradients.
class OracleClassifier : public Classifier {
public:
    OracleClassifier(const GaussianMixtureOracle& oracle, const NoiseSchedule& sched);
    PosteriorReport posterior_at(const Eigen::VectorXd& x, int t) const override;
    int num_classes() const override { return num_classes_; }
    bool has_analytic_gradients() const override { return true; }
    Eigen::VectorXd log_posterior_grad(const Eigen::VectorXd& x, int y, int t) const override;
    Eigen::VectorXd entropy_grad(const Eigen::VectorXd& x, int t) const override;

private:
    std::vector<GaussianMixtureOracle> diffused_;
    int num_classes_;
};

/// Guided noise prediction.
/// classifier mode:  eps_hat = eps - sqrt(1 - abar_t) * scale * grad log p(y | x_t)
/// uncertainty mode: eps_hat = eps - sqrt(1 - abar_t) * scale * grad U(x_t)
/// mode none or scale 0 returns the model prediction bitwise unchanged.
Eigen::VectorXd guided_epsilon(const EpsilonModel& model, const Classifier* classifier,
                               const Eigen::VectorXd& x_t, std::optional<int> y, int t,
                               const NoiseSchedule& sched, const GuidanceSpec& spec);

struct DdimStep {
    Eigen::VectorXd x_prev;
    Eigen::VectorXd x0_pred; // predicted clean point, kept for diagnostics
};

/// One deterministic sampling step t -> t-1:
/// x_{t-1} = sqrt(abar_{t-1}) * (x_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t)
///         + sqrt(1-abar_{t-1}) * eps_hat,  with abar_0 = 1.
DdimStep ddim_step(const Eigen::VectorXd& x_t, const Eigen::VectorXd& eps_hat, int t,
                   const NoiseSchedule& sched);

/// One inversion step t -> t+1 using the unguided model prediction.
Eigen::VectorXd ddim_invert_step(const Eigen::VectorXd& x_t, const EpsilonModel& model,
                                 std::optional<int> y, int t, const NoiseSchedule& sched);

enum class ChainDirection { generate, invert };

/// Full trajectory including both endpoints. states.front() is the start
/// point, states.back() the endpoint.
struct Trajectory {
    std::vector<Eigen::VectorXd> states;
    ChainDirection direction = ChainDirection::generate;
    int t_high = 0;
    int t_low = 0;

    const Eigen::VectorXd& endpoint() const { return states.back(); }
};

/// Runs a guided generation chain from t_high down to t_low, or an inversion
/// chain from t_low up to t_high (guidance forced off while inverting).
/// Aborts with step context if a state norm exceeds 1e6.
Trajectory sample_chain(const EpsilonModel& model, const Classifier* classifier,
                        const NoiseSchedule& sched, const GuidanceSpec& spec,
                        std::optional<int> y, const Eigen::VectorXd& x_start,
                        ChainDirection direction, int t_high, int t_low = 0);

/// Debug dump of one trajectory: header `t,x0..x{d-1}`, one row per state.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

struct UmsResult {
    SampleBatch stage_a; // class-guided generations
    SampleBatch stage_b; // inverted noise representations
    SampleBatch stage_c; // uncertainty-guided generations (the output batch)
};

/// Three-stage generation recipe: per class, (A) classifier-guided sampling
/// from Gaussian noise at scale class_scale, (B) deterministic inversion of
/// each endpoint back to t = T, (C) uncertainty-guided sampling from the
/// inverted noise at scale uncertainty_scale. Entropies of the A and C
/// batches are evaluated at the clean endpoints (t = 0); the B batch carries
/// the classifier entropy of the noise representation at t = T. Per-point
/// seeds derive from (seed, point index), so chains are order-independent.
UmsResult ums_generate(const EpsilonModel& model, const Classifier& classifier,
                       const NoiseSchedule& sched, int n_per_class, double class_scale,
                       double uncertainty_scale, std::uint64_t seed,
                       GradientSource gradient_source = GradientSource::analytic);

} // namespace umst
