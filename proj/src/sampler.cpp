// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/sampler.hpp"

#include "umst/common.hpp"
#include "umst/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace umst {

namespace {

constexpr double kDivergenceNorm = 1e6;

// Central finite difference of a scalar field, step 1e-3 relative to the
// coordinate scale. Used for classifiers without analytic input gradients.
template <typename F>
Eigen::VectorXd central_gradient(const F& f, const Eigen::VectorXd& x)
{
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-3 * std::max(1.0, std::abs(x(i)));
        probe(i) = x(i) + h;
        const double fp = f(probe);
        probe(i) = x(i) - h;
        const double fm = f(probe);
        probe(i) = x(i);
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace

Eigen::VectorXd Classifier::log_posterior_grad(const Eigen::VectorXd& x, int y, int t) const
{
    return central_gradient(
        [&](const Eigen::VectorXd& p) {
            const double prob = posterior_at(p, t).probs(y);
            return std::log(std::max(prob, 1e-300));
        },
        x);
}

Eigen::VectorXd Classifier::entropy_grad(const Eigen::VectorXd& x, int t) const
{
    return central_gradient(
        [&](const Eigen::VectorXd& p) { return posterior_at(p, t).entropy; }, x);
}

std::string to_string(GuidanceMode mode)
{
    switch (mode) {
    case GuidanceMode::none: return "none";
    case GuidanceMode::classifier: return "classifier";
    case GuidanceMode::uncertainty: return "uncertainty";
    }
    return "none";
}

std::string to_string(GradientSource source)
{
    return source == GradientSource::analytic ? "analytic" : "finite_difference";
}

GradientSource gradient_source_from_string(const std::string& name)
{
    if (name == "analytic") {
        return GradientSource::analytic;
    }
    if (name == "finite_difference") {
        return GradientSource::finite_difference;
    }
    throw ManifestError("unknown gradient source: " + name);
}

OracleEpsilonModel::OracleEpsilonModel(const GaussianMixtureOracle& oracle,
                                       const NoiseSchedule& sched)
    : dim_(oracle.dim())
{
    diffused_.reserve(static_cast<std::size_t>(sched.steps()) + 1);
    sqrt_one_minus_abar_.reserve(static_cast<std::size_t>(sched.steps()) + 1);
    for (int t = 0; t <= sched.steps(); ++t) {
        diffused_.push_back(oracle.diffused(sched, t));
        sqrt_one_minus_abar_.push_back(std::sqrt(1.0 - sched.alpha_bar(t)));
    }
}

Eigen::VectorXd OracleEpsilonModel::predict(const Eigen::VectorXd& x_t,
                                            std::optional<int> /*y*/, int t) const
{
    if (t < 0 || t >= static_cast<int>(diffused_.size())) {
        throw NumericalError("epsilon model queried outside schedule: t=" + std::to_string(t));
    }
    const double s = sqrt_one_minus_abar_[static_cast<std::size_t>(t)];
    if (s == 0.0) {
        return Eigen::VectorXd::Zero(dim_);
    }
    return -s * diffused_[static_cast<std::size_t>(t)].score(x_t);
}

OracleClassifier::OracleClassifier(const GaussianMixtureOracle& oracle,
                                   const NoiseSchedule& sched)
    : num_classes_(oracle.num_classes())
{
    diffused_.reserve(static_cast<std::size_t>(sched.steps()) + 1);
    for (int t = 0; t <= sched.steps(); ++t) {
        diffused_.push_back(oracle.diffused(sched, t));
    }
}

PosteriorReport OracleClassifier::posterior_at(const Eigen::VectorXd& x, int t) const
{
    return diffused_.at(static_cast<std::size_t>(t)).posterior(x);
}

Eigen::VectorXd OracleClassifier::log_posterior_grad(const Eigen::VectorXd& x, int y,
                                                     int t) const
{
    return diffused_.at(static_cast<std::size_t>(t)).class_log_posterior_grad(x, y);
}

Eigen::VectorXd OracleClassifier::entropy_grad(const Eigen::VectorXd& x, int t) const
{
    return diffused_.at(static_cast<std::size_t>(t)).posterior(x).entropy_grad;
}

Eigen::VectorXd guided_epsilon(const EpsilonModel& model, const Classifier* classifier,
                               const Eigen::VectorXd& x_t, std::optional<int> y, int t,
                               const NoiseSchedule& sched, const GuidanceSpec& spec)
{
    if (spec.scale < 0.0) {
        throw NumericalError("guidance scale must be nonnegative");
    }
    Eigen::VectorXd eps = model.predict(x_t, y, t);
    if (spec.mode == GuidanceMode::none || spec.scale == 0.0) {
        return eps;
    }
    if (classifier == nullptr) {
        throw NumericalError("guided sampling requires a classifier");
    }

    Eigen::VectorXd grad;
    const bool analytic = spec.gradient_source == GradientSource::analytic &&
                          classifier->has_analytic_gradients();
    if (spec.mode == GuidanceMode::classifier) {
        if (!y.has_value()) {
            throw NumericalError("classifier guidance requires a target class");
        }
        grad = analytic ? classifier->log_posterior_grad(x_t, *y, t)
                        : classifier->Classifier::log_posterior_grad(x_t, *y, t);
    } else {
        grad = analytic ? classifier->entropy_grad(x_t, t)
                        : classifier->Classifier::entropy_grad(x_t, t);
    }
    if (!grad.allFinite()) {
        std::string where = "(";
        for (Eigen::Index i = 0; i < x_t.size(); ++i) {
            where += (i ? ", " : "") + std::to_string(x_t(i));
        }
        throw NumericalError("non-finite guidance gradient at t=" + std::to_string(t) +
                             ", point " + where + ")");
    }
    return eps - std::sqrt(1.0 - sched.alpha_bar(t)) * spec.scale * grad;
}

DdimStep ddim_step(const Eigen::VectorXd& x_t, const Eigen::VectorXd& eps_hat, int t,
                   const NoiseSchedule& sched)
{
    const double abar_t = sched.alpha_bar(t);
    const double abar_prev = sched.alpha_bar(t - 1);
    DdimStep out;
    out.x0_pred = (x_t - std::sqrt(1.0 - abar_t) * eps_hat) / std::sqrt(abar_t);
    out.x_prev = std::sqrt(abar_prev) * out.x0_pred + std::sqrt(1.0 - abar_prev) * eps_hat;
    return out;
}

Eigen::VectorXd ddim_invert_step(const Eigen::VectorXd& x_t, const EpsilonModel& model,
                                 std::optional<int> y, int t, const NoiseSchedule& sched)
{
    if (t >= sched.steps()) {
        throw NumericalError("inversion step out of range: t=" + std::to_string(t));
    }
    const Eigen::VectorXd eps = model.predict(x_t, y, t);
    const double abar_t = sched.alpha_bar(t);
    const double abar_next = sched.alpha_bar(t + 1);
    const Eigen::VectorXd x0_pred = (x_t - std::sqrt(1.0 - abar_t) * eps) / std::sqrt(abar_t);
    return std::sqrt(abar_next) * x0_pred + std::sqrt(1.0 - abar_next) * eps;
}

Trajectory sample_chain(const EpsilonModel& model, const Classifier* classifier,
                        const NoiseSchedule& sched, const GuidanceSpec& spec,
                        std::optional<int> y, const Eigen::VectorXd& x_start,
                        ChainDirection direction, int t_high, int t_low)
{
    if (t_low < 0 || t_high > sched.steps() || t_low >= t_high) {
        throw NumericalError("invalid chain range [" + std::to_string(t_low) + ", " +
                             std::to_string(t_high) + "]");
    }

    Trajectory traj;
    traj.direction = direction;
    traj.t_high = t_high;
    traj.t_low = t_low;
    traj.states.reserve(static_cast<std::size_t>(t_high - t_low) + 1);
    traj.states.push_back(x_start);

    const auto guard = [&](const Eigen::VectorXd& x, int t) {
        if (!x.allFinite() || x.norm() > kDivergenceNorm) {
            throw NumericalError("trajectory diverged at step t=" + std::to_string(t));
        }
    };

    Eigen::VectorXd x = x_start;
    if (direction == ChainDirection::generate) {
        for (int t = t_high; t > t_low; --t) {
            const Eigen::VectorXd eps_hat =
                guided_epsilon(model, classifier, x, y, t, sched, spec);
            x = ddim_step(x, eps_hat, t, sched).x_prev;
            guard(x, t - 1);
            traj.states.push_back(x);
        }
    } else {
        for (int t = t_low; t < t_high; ++t) {
            x = ddim_invert_step(x, model, y, t, sched);
            guard(x, t + 1);
            traj.states.push_back(x);
        }
    }
    return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    const int d = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
    out << "t";
    for (int j = 0; j < d; ++j) {
        out << ",x" << j;
    }
    out << "\n";
    const bool down = traj.direction == ChainDirection::generate;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const int t = down ? traj.t_high - static_cast<int>(i)
                           : traj.t_low + static_cast<int>(i);
        out << t;
        for (int j = 0; j < d; ++j) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", traj.states[i](j));
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

UmsResult ums_generate(const EpsilonModel& model, const Classifier& classifier,
                       const NoiseSchedule& sched, int n_per_class, double class_scale,
                       double uncertainty_scale, std::uint64_t seed,
                       GradientSource gradient_source)
{
    if (n_per_class < 1) {
        throw ManifestError("n_per_class must be >= 1");
    }
    const int num_classes = classifier.num_classes();
    const int n_total = num_classes * n_per_class;
    const int d = model.dim();
    const int T = sched.steps();

    const auto make_batch = [&](Stage stage) {
        SampleBatch b;
        b.stage = stage;
        b.seed = seed;
        b.points.resize(n_total, d);
        b.labels.resize(static_cast<std::size_t>(n_total));
        b.entropies.resize(n_total);
        return b;
    };
    UmsResult result{make_batch(Stage::class_guided), make_batch(Stage::inverted_noise),
                     make_batch(Stage::uncertainty_guided)};

    const GuidanceSpec class_spec{GuidanceMode::classifier, class_scale, gradient_source};
    const GuidanceSpec unc_spec{GuidanceMode::uncertainty, uncertainty_scale, gradient_source};

    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            const int idx = c * n_per_class + i;
            Rng rng(derive_seed(seed, "ums.init", static_cast<std::uint64_t>(idx)));
            Eigen::VectorXd x_T(d);
            for (int j = 0; j < d; ++j) {
                x_T(j) = rng.normal();
            }

            const Eigen::VectorXd x0_a =
                sample_chain(model, &classifier, sched, class_spec, c, x_T,
                             ChainDirection::generate, T)
                    .endpoint();
            const Eigen::VectorXd noise_b =
                sample_chain(model, &classifier, sched, GuidanceSpec{}, c, x0_a,
                             ChainDirection::invert, T)
                    .endpoint();
            const Eigen::VectorXd x0_c =
                sample_chain(model, &classifier, sched, unc_spec, c, noise_b,
                             ChainDirection::generate, T)
                    .endpoint();

            result.stage_a.points.row(idx) = x0_a.transpose();
            result.stage_b.points.row(idx) = noise_b.transpose();
            result.stage_c.points.row(idx) = x0_c.transpose();
            result.stage_a.labels[static_cast<std::size_t>(idx)] = c;
            result.stage_b.labels[static_cast<std::size_t>(idx)] = c;
            result.stage_c.labels[static_cast<std::size_t>(idx)] = c;
            result.stage_a.entropies(idx) = classifier.posterior_at(x0_a, 0).entropy;
            result.stage_b.entropies(idx) = classifier.posterior_at(noise_b, T).entropy;
            result.stage_c.entropies(idx) = classifier.posterior_at(x0_c, 0).entropy;
        }
    }
    return result;
}

} // namespace umst
