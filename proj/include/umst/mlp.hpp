// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "umst/oracle.hpp"
#include "umst/sampler.hpp"
#include "umst/schedule.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace umst {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, softmax = 3 };

/// Input layout of a toy network: the raw point, a sinusoidal embedding of
/// the timestep, and optionally a one-hot class embedding.
struct EmbedSpec {
    int data_dim = 0;
    int time_embed_width = 16; // must be even
    int num_classes = 0;       // 0 = unconditioned input

    int input_dim() const { return data_dim + time_embed_width + num_classes; }
    bool operator==(const EmbedSpec&) const = default;
};

struct Layer {
    Eigen::MatrixXd w; // out x in
    Eigen::VectorXd b;
    Activation act = Activation::identity;
};

/// Small dense network with manual forward/backward. Softmax is only valid
/// as the final activation of a classifier.
class Mlp {
public:
    Mlp(EmbedSpec embed, std::vector<Layer> layers);

    /// Random tanh/identity initialization. zero_init_output zeroes the last
    /// layer, which makes an untrained classifier predict the uniform
    /// distribution exactly.
    static Mlp make(const EmbedSpec& embed, const std::vector<int>& hidden, int out_dim,
                    Activation hidden_act, Activation out_act, bool zero_init_output,
                    std::uint64_t seed);

    const EmbedSpec& embed() const { return embed_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    int output_dim() const { return static_cast<int>(layers_.back().w.rows()); }

    Eigen::VectorXd embed_input(const Eigen::VectorXd& x, std::optional<int> y, int t) const;
    Eigen::VectorXd forward(const Eigen::VectorXd& x, std::optional<int> y, int t) const;

    /// Columns are samples of the already-embedded input.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    /// Flat binary checkpoint: magic "UMSN", version u32, layer count u32,
    /// then per layer rows u32, cols u32, weights row-major f64 LE, biases
    /// f64 LE, activation tag u8. The embed spec is not stored; callers
    /// supply it on load (it lives in the experiment manifest).
    void save(const std::filesystem::path& path) const;
    static Mlp load(const std::filesystem::path& path, const EmbedSpec& embed);

private:
    EmbedSpec embed_;
    std::vector<Layer> layers_;
};

struct MlpGradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
};

/// Post-activation values per layer; acts[0] is the input batch.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> acts;
};

ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& inputs);

/// L = weight * mean_b ||pred_b - target_b||^2 and its parameter gradients.
double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& targets, double weight);
MlpGradients backward_mse(const Mlp& net, const ForwardCache& cache,
                          const Eigen::MatrixXd& targets, double weight);

/// L = mean_b -log p[label_b] for softmax-output networks.
double cross_entropy_loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels);
MlpGradients backward_cross_entropy(const Mlp& net, const ForwardCache& cache,
                                    const std::vector<int>& labels);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(const Mlp& net, AdamConfig cfg);
    void step(Mlp& net, const MlpGradients& grads);

private:
    AdamConfig cfg_;
    long step_count_ = 0;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

struct TrainConfig {
    int steps = 2000;
    int batch_size = 64;
    AdamConfig adam;
    double timestep_weight = 1.0; // uniform loss weight across timesteps
};

struct TrainResult {
    Mlp net;
    std::vector<double> loss_curve;
};

/// Noise-prediction regression: draw (x0, y) from the oracle, t uniform in
/// [1, T], eps standard normal, form x_t and regress eps under the squared
/// error weighted by timestep_weight. Deterministic for a given seed.
TrainResult train_denoiser(Mlp net, const GaussianMixtureOracle& oracle,
                           const NoiseSchedule& sched, const TrainConfig& cfg,
                           std::uint64_t seed);

/// Cross-entropy over noisy inputs with t uniform in [0, T] (t = 0 keeps the
/// clean point, which is also where accuracy is evaluated).
TrainResult train_classifier(Mlp net, const GaussianMixtureOracle& oracle,
                             const NoiseSchedule& sched, const TrainConfig& cfg,
                             std::uint64_t seed);

/// Accuracy against oracle labels on clean draws (t = 0).
double classifier_accuracy(const Mlp& net, const GaussianMixtureOracle& oracle, int n,
                           std::uint64_t seed);

/// Trained-network adapters for the sampling interfaces.
class MlpEpsilonModel : public EpsilonModel {
public:
    explicit MlpEpsilonModel(Mlp net) : net_(std::move(net)) {}
    Eigen::VectorXd predict(const Eigen::VectorXd& x_t, std::optional<int> y,
                            int t) const override;
    int dim() const override { return net_.embed().data_dim; }

private:
    Mlp net_;
};

class MlpClassifier : public Classifier {
public:
    explicit MlpClassifier(Mlp net) : net_(std::move(net)) {}
    PosteriorReport posterior_at(const Eigen::VectorXd& x, int t) const override;
    int num_classes() const override { return net_.output_dim(); }

private:
    Mlp net_;
};

} // namespace umst
