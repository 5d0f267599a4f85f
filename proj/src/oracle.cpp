// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/oracle.hpp"

#include "umst/common.hpp"
#include "umst/rng.hpp"

#include <cmath>
#include <set>

namespace umst {

GaussianMixtureOracle::GaussianMixtureOracle(std::vector<GmComponent> components)
    : components_(std::move(components))
{
    if (components_.empty()) {
        throw ManifestError("mixture needs at least one component");
    }
    dim_ = static_cast<int>(components_[0].mean.size());

    double weight_sum = 0.0;
    std::set<int> labels;
    factored_.reserve(components_.size());
    for (const auto& comp : components_) {
        if (comp.mean.size() != dim_ || comp.cov.rows() != dim_ || comp.cov.cols() != dim_) {
            throw ManifestError("mixture component dimensions disagree");
        }
        if (!(comp.weight >= 0.0)) {
            throw ManifestError("component weight must be nonnegative");
        }
        weight_sum += comp.weight;
        labels.insert(comp.label);

        Factored f;
        f.llt.compute(comp.cov);
        if (f.llt.info() != Eigen::Success) {
            throw NumericalError("component covariance is not positive definite");
        }
        double log_det = 0.0;
        const auto& L = f.llt.matrixL();
        for (int i = 0; i < dim_; ++i) {
            log_det += 2.0 * std::log(L(i, i));
        }
        f.log_norm = -0.5 * log_det - 0.5 * dim_ * std::log(2.0 * M_PI);
        factored_.push_back(std::move(f));
    }
    if (std::abs(weight_sum - 1.0) > 1e-12) {
        throw ManifestError("mixture weights must sum to 1");
    }
    for (int lbl : labels) {
        if (lbl < 0) {
            throw ManifestError("class labels must be nonnegative");
        }
    }
    num_classes_ = labels.empty() ? 0 : *labels.rbegin() + 1;
}

void GaussianMixtureOracle::component_log_terms(const Eigen::VectorXd& x,
                                                Eigen::VectorXd& out) const
{
    out.resize(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& comp = components_[k];
        if (comp.weight <= 0.0) {
            out(static_cast<Eigen::Index>(k)) = -std::numeric_limits<double>::infinity();
            continue;
        }
        const Eigen::VectorXd r = x - comp.mean;
        const Eigen::VectorXd w = factored_[k].llt.matrixL().solve(r);
        out(static_cast<Eigen::Index>(k)) =
            std::log(comp.weight) + factored_[k].log_norm - 0.5 * w.squaredNorm();
    }
}

double GaussianMixtureOracle::responsibilities(const Eigen::VectorXd& x,
                                               Eigen::VectorXd& out) const
{
    component_log_terms(x, out);
    const double m = out.maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        out(k) = std::exp(out(k) - m);
        sum += out(k);
    }
    out /= sum;
    return m + std::log(sum);
}

double GaussianMixtureOracle::log_density(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd resp;
    return responsibilities(x, resp);
}

Eigen::VectorXd GaussianMixtureOracle::score(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd resp;
    responsibilities(x, resp);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double r = resp(static_cast<Eigen::Index>(k));
        if (r == 0.0) {
            continue;
        }
        s += r * factored_[k].llt.solve(components_[k].mean - x);
    }
    return s;
}

GaussianMixtureOracle GaussianMixtureOracle::diffused(const NoiseSchedule& sched, int t) const
{
    const double abar = sched.alpha_bar(t);
    const double scale = std::sqrt(abar);
    std::vector<GmComponent> comps = components_;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim_, dim_);
    for (auto& comp : comps) {
        comp.mean = scale * comp.mean;
        comp.cov = abar * comp.cov + (1.0 - abar) * eye;
    }
    return GaussianMixtureOracle(std::move(comps));
}

Eigen::VectorXd GaussianMixtureOracle::exact_epsilon(const NoiseSchedule& sched,
                                                     const Eigen::VectorXd& x_t, int t) const
{
    const double abar = sched.alpha_bar(t);
    if (abar >= 1.0) {
        return Eigen::VectorXd::Zero(dim_);
    }
    return -std::sqrt(1.0 - abar) * diffused(sched, t).score(x_t);
}

PosteriorReport GaussianMixtureOracle::posterior(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd resp;
    responsibilities(x, resp);

    PosteriorReport report;
    report.probs = Eigen::VectorXd::Zero(num_classes_);
    std::vector<Eigen::VectorXd> class_num(static_cast<std::size_t>(num_classes_),
                                           Eigen::VectorXd::Zero(dim_));
    Eigen::VectorXd full_score = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double r = resp(static_cast<Eigen::Index>(k));
        if (r == 0.0) {
            continue;
        }
        const Eigen::VectorXd term = r * factored_[k].llt.solve(components_[k].mean - x);
        report.probs(components_[k].label) += r;
        class_num[static_cast<std::size_t>(components_[k].label)] += term;
        full_score += term;
    }

    // p_c log p_c and its gradient both vanish in the p_c -> 0 limit; classes
    // below 1e-300 are dropped to avoid NaN from log(0).
    report.entropy = 0.0;
    report.entropy_grad = Eigen::VectorXd::Zero(dim_);
    for (int c = 0; c < num_classes_; ++c) {
        const double p = report.probs(c);
        if (p < 1e-300) {
            continue;
        }
        const double logp = std::log(p);
        report.entropy -= p * logp;
        // grad p_c = p_c (s_c - s), with s_c the class-conditional score.
        const Eigen::VectorXd grad_p = class_num[static_cast<std::size_t>(c)] - p * full_score;
        report.entropy_grad -= (1.0 + logp) * grad_p;
    }
    if (report.entropy < 0.0) {
        report.entropy = 0.0; // clip float dust from saturated posteriors
    }
    return report;
}

Eigen::VectorXd GaussianMixtureOracle::class_log_posterior_grad(const Eigen::VectorXd& x,
                                                                int c) const
{
    if (c < 0 || c >= num_classes_) {
        throw NumericalError("class id out of range: " + std::to_string(c));
    }
    Eigen::VectorXd resp;
    responsibilities(x, resp);

    double p_c = 0.0;
    Eigen::VectorXd class_num = Eigen::VectorXd::Zero(dim_);
    Eigen::VectorXd full_score = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double r = resp(static_cast<Eigen::Index>(k));
        if (r == 0.0) {
            continue;
        }
        const Eigen::VectorXd term = r * factored_[k].llt.solve(components_[k].mean - x);
        full_score += term;
        if (components_[k].label == c) {
            p_c += r;
            class_num += term;
        }
    }
    if (p_c < 1e-300) {
        // Deep in another class: fall back to the dominant component geometry,
        // grad log p(c|x) ~ s_c - s evaluated through the class-conditional
        // responsibilities alone.
        Eigen::VectorXd log_terms;
        component_log_terms(x, log_terms);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < components_.size(); ++k) {
            if (components_[k].label == c && log_terms(static_cast<Eigen::Index>(k)) > best) {
                best = log_terms(static_cast<Eigen::Index>(k));
                best_k = k;
            }
        }
        return factored_[best_k].llt.solve(components_[best_k].mean - x) - full_score;
    }
    return class_num / p_c - full_score;
}

SampleBatch GaussianMixtureOracle::sample_data(int n, std::uint64_t seed) const
{
    if (n < 1) {
        throw ManifestError("sample count must be >= 1");
    }
    Rng rng(derive_seed(seed, "oracle.sample", 0));

    SampleBatch batch;
    batch.stage = Stage::data;
    batch.seed = seed;
    batch.points.resize(n, dim_);
    batch.labels.resize(static_cast<std::size_t>(n));
    batch.entropies.resize(n);

    for (int i = 0; i < n; ++i) {
        // Component choice by CDF inversion.
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = components_.size() - 1;
        for (std::size_t k = 0; k < components_.size(); ++k) {
            acc += components_[k].weight;
            if (u <= acc) {
                pick = k;
                break;
            }
        }
        Eigen::VectorXd z(dim_);
        for (int j = 0; j < dim_; ++j) {
            z(j) = rng.normal();
        }
        const Eigen::VectorXd x =
            components_[pick].mean + factored_[pick].llt.matrixL() * z;
        batch.points.row(i) = x.transpose();
        batch.labels[static_cast<std::size_t>(i)] = components_[pick].label;
        batch.entropies(i) = posterior(x).entropy;
    }
    return batch;
}

GaussianMixtureOracle GaussianMixtureOracle::default_world()
{
    std::vector<GmComponent> comps;
    const double radius = 4.0;
    for (int c = 0; c < 3; ++c) {
        const double angle = M_PI / 2.0 + c * 2.0 * M_PI / 3.0;
        GmComponent comp;
        comp.mean = Eigen::Vector2d(radius * std::cos(angle), radius * std::sin(angle));
        comp.cov = Eigen::Matrix2d::Identity();
        comp.label = c;
        comp.weight = 1.0 / 3.0;
        comps.push_back(std::move(comp));
    }
    return GaussianMixtureOracle(std::move(comps));
}

} // namespace umst
