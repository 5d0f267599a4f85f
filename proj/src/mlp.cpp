// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/mlp.hpp"

#include "umst/common.hpp"
#include "umst/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace umst {

namespace {

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation act)
{
    switch (act) {
    case Activation::identity:
        return z;
    case Activation::relu:
        return z.cwiseMax(0.0);
    case Activation::tanh:
        return z.array().tanh().matrix();
    case Activation::softmax: {
        Eigen::MatrixXd out(z.rows(), z.cols());
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            const double m = z.col(c).maxCoeff();
            Eigen::ArrayXd e = (z.col(c).array() - m).exp();
            out.col(c) = (e / e.sum()).matrix();
        }
        return out;
    }
    }
    return z;
}

// Derivative expressed through the post-activation value a = act(z).
Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& a, Activation act)
{
    switch (act) {
    case Activation::identity:
        return Eigen::MatrixXd::Ones(a.rows(), a.cols());
    case Activation::relu:
        return (a.array() > 0.0).cast<double>().matrix();
    case Activation::tanh:
        return (1.0 - a.array().square()).matrix();
    case Activation::softmax:
        throw NumericalError("softmax backward requires the cross-entropy head");
    }
    return Eigen::MatrixXd::Ones(a.rows(), a.cols());
}

// Shared backward pass from dL/dz of the last layer.
MlpGradients backprop_from_last_dz(const Mlp& net, const ForwardCache& cache,
                                   Eigen::MatrixXd dz)
{
    const auto& layers = net.layers();
    MlpGradients grads;
    grads.dw.resize(layers.size());
    grads.db.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        grads.dw[l] = dz * cache.acts[l].transpose();
        grads.db[l] = dz.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd da_prev = layers[l].w.transpose() * dz;
            dz = da_prev.cwiseProduct(activation_derivative(cache.acts[l], layers[l - 1].act));
        }
    }
    return grads;
}

void write_u32(std::ofstream& out, std::uint32_t v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ofstream& out, double v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in)
{
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

double read_f64(std::ifstream& in)
{
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

} // namespace

Mlp::Mlp(EmbedSpec embed, std::vector<Layer> layers)
    : embed_(embed), layers_(std::move(layers))
{
    if (layers_.empty()) {
        throw ManifestError("network needs at least one layer");
    }
    int in_dim = embed_.input_dim();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].w.cols() != in_dim || layers_[l].b.size() != layers_[l].w.rows()) {
            throw ManifestError("layer " + std::to_string(l) + " dimensions do not chain");
        }
        if (layers_[l].act == Activation::softmax && l + 1 != layers_.size()) {
            throw ManifestError("softmax is only valid on the final layer");
        }
        in_dim = static_cast<int>(layers_[l].w.rows());
    }
    if (embed_.time_embed_width % 2 != 0) {
        throw ManifestError("time embedding width must be even");
    }
}

Mlp Mlp::make(const EmbedSpec& embed, const std::vector<int>& hidden, int out_dim,
              Activation hidden_act, Activation out_act, bool zero_init_output,
              std::uint64_t seed)
{
    Rng rng(derive_seed(seed, "mlp.init", 0));
    std::vector<Layer> layers;
    int in_dim = embed.input_dim();
    std::vector<int> widths = hidden;
    widths.push_back(out_dim);
    for (std::size_t l = 0; l < widths.size(); ++l) {
        const int out = widths[l];
        Layer layer;
        layer.w.resize(out, in_dim);
        layer.b = Eigen::VectorXd::Zero(out);
        layer.act = (l + 1 == widths.size()) ? out_act : hidden_act;
        const bool zero = zero_init_output && l + 1 == widths.size();
        const double scale = std::sqrt(2.0 / static_cast<double>(in_dim + out));
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in_dim; ++c) {
                layer.w(r, c) = zero ? 0.0 : scale * rng.normal();
            }
        }
        layers.push_back(std::move(layer));
        in_dim = out;
    }
    return Mlp(embed, std::move(layers));
}

Eigen::VectorXd Mlp::embed_input(const Eigen::VectorXd& x, std::optional<int> y, int t) const
{
    if (x.size() != embed_.data_dim) {
        throw NumericalError("input dimension mismatch");
    }
    Eigen::VectorXd in = Eigen::VectorXd::Zero(embed_.input_dim());
    in.head(embed_.data_dim) = x;

    const int half = embed_.time_embed_width / 2;
    for (int i = 0; i < half; ++i) {
        const double freq =
            std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        in(embed_.data_dim + 2 * i) = std::sin(t * freq);
        in(embed_.data_dim + 2 * i + 1) = std::cos(t * freq);
    }
    if (embed_.num_classes > 0) {
        if (y.has_value()) {
            if (*y < 0 || *y >= embed_.num_classes) {
                throw NumericalError("class id out of range: " + std::to_string(*y));
            }
            in(embed_.data_dim + embed_.time_embed_width + *y) = 1.0;
        }
        // absent label leaves the one-hot block zero (unconditional query)
    }
    return in;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, std::optional<int> y, int t) const
{
    Eigen::MatrixXd a = embed_input(x, y, t);
    for (const auto& layer : layers_) {
        a = apply_activation((layer.w * a).colwise() + layer.b, layer.act);
    }
    return a.col(0);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const
{
    Eigen::MatrixXd a = inputs;
    for (const auto& layer : layers_) {
        a = apply_activation((layer.w * a).colwise() + layer.b, layer.act);
    }
    return a;
}

ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& inputs)
{
    ForwardCache cache;
    cache.acts.reserve(net.layers().size() + 1);
    cache.acts.push_back(inputs);
    Eigen::MatrixXd a = inputs;
    for (const auto& layer : net.layers()) {
        a = apply_activation((layer.w * a).colwise() + layer.b, layer.act);
        cache.acts.push_back(a);
    }
    return cache;
}

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& targets, double weight)
{
    const double n = static_cast<double>(pred.cols());
    return weight * (pred - targets).squaredNorm() / n;
}

MlpGradients backward_mse(const Mlp& net, const ForwardCache& cache,
                          const Eigen::MatrixXd& targets, double weight)
{
    const auto& out = cache.acts.back();
    const double n = static_cast<double>(out.cols());
    Eigen::MatrixXd da = 2.0 * weight * (out - targets) / n;
    const Activation last = net.layers().back().act;
    Eigen::MatrixXd dz = da.cwiseProduct(activation_derivative(out, last));
    return backprop_from_last_dz(net, cache, std::move(dz));
}

double cross_entropy_loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels)
{
    double loss = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        loss -= std::log(std::max(probs(labels[static_cast<std::size_t>(c)], c), 1e-300));
    }
    return loss / static_cast<double>(probs.cols());
}

MlpGradients backward_cross_entropy(const Mlp& net, const ForwardCache& cache,
                                    const std::vector<int>& labels)
{
    if (net.layers().back().act != Activation::softmax) {
        throw NumericalError("cross-entropy head requires a softmax output layer");
    }
    // Fused softmax + cross-entropy: dL/dz = (p - onehot) / B.
    Eigen::MatrixXd dz = cache.acts.back();
    const double n = static_cast<double>(dz.cols());
    for (Eigen::Index c = 0; c < dz.cols(); ++c) {
        dz(labels[static_cast<std::size_t>(c)], c) -= 1.0;
    }
    dz /= n;
    return backprop_from_last_dz(net, cache, std::move(dz));
}

void Mlp::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path.string());
    }
    out.write("UMSN", 4);
    write_u32(out, 1u);
    write_u32(out, static_cast<std::uint32_t>(layers_.size()));
    for (const auto& layer : layers_) {
        write_u32(out, static_cast<std::uint32_t>(layer.w.rows()));
        write_u32(out, static_cast<std::uint32_t>(layer.w.cols()));
        for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
                write_f64(out, layer.w(r, c));
            }
        }
        for (Eigen::Index r = 0; r < layer.b.size(); ++r) {
            write_f64(out, layer.b(r));
        }
        const std::uint8_t tag = static_cast<std::uint8_t>(layer.act);
        out.write(reinterpret_cast<const char*>(&tag), 1);
    }
    if (!out) {
        throw IoError("checkpoint write failed: " + path.string());
    }
}

Mlp Mlp::load(const std::filesystem::path& path, const EmbedSpec& embed)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path.string());
    }
    char magic[4] = {};
    in.read(magic, 4);
    if (std::memcmp(magic, "UMSN", 4) != 0) {
        throw IoError("bad checkpoint magic in " + path.string());
    }
    const std::uint32_t version = read_u32(in);
    if (version != 1u) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t count = read_u32(in);
    std::vector<Layer> layers;
    layers.reserve(count);
    for (std::uint32_t l = 0; l < count; ++l) {
        const std::uint32_t rows = read_u32(in);
        const std::uint32_t cols = read_u32(in);
        Layer layer;
        layer.w.resize(rows, cols);
        layer.b.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                layer.w(r, c) = read_f64(in);
            }
        }
        for (std::uint32_t r = 0; r < rows; ++r) {
            layer.b(r) = read_f64(in);
        }
        std::uint8_t tag = 0;
        in.read(reinterpret_cast<char*>(&tag), 1);
        if (tag > 3) {
            throw IoError("bad activation tag in " + path.string());
        }
        layer.act = static_cast<Activation>(tag);
        layers.push_back(std::move(layer));
    }
    if (!in) {
        throw IoError("truncated checkpoint: " + path.string());
    }
    return Mlp(embed, std::move(layers));
}

Adam::Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg)
{
    for (const auto& layer : net.layers()) {
        mw_.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
        vw_.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
        mb_.push_back(Eigen::VectorXd::Zero(layer.b.size()));
        vb_.push_back(Eigen::VectorXd::Zero(layer.b.size()));
    }
}

void Adam::step(Mlp& net, const MlpGradients& grads)
{
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        mw_[l] = cfg_.beta1 * mw_[l] + (1.0 - cfg_.beta1) * grads.dw[l];
        vw_[l] = cfg_.beta2 * vw_[l] + (1.0 - cfg_.beta2) * grads.dw[l].cwiseProduct(grads.dw[l]);
        mb_[l] = cfg_.beta1 * mb_[l] + (1.0 - cfg_.beta1) * grads.db[l];
        vb_[l] = cfg_.beta2 * vb_[l] + (1.0 - cfg_.beta2) * grads.db[l].cwiseProduct(grads.db[l]);

        layers[l].w -= (cfg_.lr * (mw_[l] / bc1).array() /
                        ((vw_[l] / bc2).array().sqrt() + cfg_.eps))
                           .matrix();
        layers[l].b -= (cfg_.lr * (mb_[l] / bc1).array() /
                        ((vb_[l] / bc2).array().sqrt() + cfg_.eps))
                           .matrix();
    }
}

namespace {

struct TrainingBatch {
    Eigen::MatrixXd inputs;  // embedded, in_dim x B
    Eigen::MatrixXd targets; // denoiser only
    std::vector<int> labels; // classifier only
};

TrainingBatch draw_batch(const Mlp& net, const GaussianMixtureOracle& oracle,
                         const NoiseSchedule& sched, int batch_size, bool for_classifier,
                         std::uint64_t seed, int step)
{
    const SampleBatch data =
        oracle.sample_data(batch_size, derive_seed(seed, "train.data", static_cast<std::uint64_t>(step)));
    Rng rng(derive_seed(seed, "train.noise", static_cast<std::uint64_t>(step)));

    const int d = oracle.dim();
    TrainingBatch batch;
    batch.inputs.resize(net.embed().input_dim(), batch_size);
    if (!for_classifier) {
        batch.targets.resize(d, batch_size);
    }
    batch.labels.resize(static_cast<std::size_t>(batch_size));

    for (int b = 0; b < batch_size; ++b) {
        const Eigen::VectorXd x0 = data.points.row(b).transpose();
        const int label = data.labels[static_cast<std::size_t>(b)];
        // Denoisers train on t in [1, T]; the classifier also sees t = 0.
        const int t_lo = for_classifier ? 0 : 1;
        const int span = sched.steps() - t_lo + 1;
        int t = t_lo + static_cast<int>(rng.uniform() * span);
        t = std::min(t, sched.steps());

        Eigen::VectorXd eps(d);
        for (int j = 0; j < d; ++j) {
            eps(j) = rng.normal();
        }
        const Eigen::VectorXd x_t = q_sample(x0, t, eps, sched);
        const std::optional<int> cond =
            for_classifier ? std::nullopt : std::optional<int>(label);
        batch.inputs.col(b) = net.embed_input(x_t, cond, t);
        if (!for_classifier) {
            batch.targets.col(b) = eps;
        }
        batch.labels[static_cast<std::size_t>(b)] = label;
    }
    return batch;
}

} // namespace

TrainResult train_denoiser(Mlp net, const GaussianMixtureOracle& oracle,
                           const NoiseSchedule& sched, const TrainConfig& cfg,
                           std::uint64_t seed)
{
    Adam opt(net, cfg.adam);
    TrainResult result{std::move(net), {}};
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        const TrainingBatch batch =
            draw_batch(result.net, oracle, sched, cfg.batch_size, false, seed, step);
        const ForwardCache cache = forward_cached(result.net, batch.inputs);
        const double loss = mse_loss(cache.acts.back(), batch.targets, cfg.timestep_weight);
        if (!std::isfinite(loss)) {
            throw NumericalError("denoiser loss diverged at step " + std::to_string(step));
        }
        result.loss_curve.push_back(loss);
        const MlpGradients grads =
            backward_mse(result.net, cache, batch.targets, cfg.timestep_weight);
        opt.step(result.net, grads);
    }
    return result;
}

TrainResult train_classifier(Mlp net, const GaussianMixtureOracle& oracle,
                             const NoiseSchedule& sched, const TrainConfig& cfg,
                             std::uint64_t seed)
{
    Adam opt(net, cfg.adam);
    TrainResult result{std::move(net), {}};
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        const TrainingBatch batch =
            draw_batch(result.net, oracle, sched, cfg.batch_size, true, seed, step);
        const ForwardCache cache = forward_cached(result.net, batch.inputs);
        const double loss = cross_entropy_loss(cache.acts.back(), batch.labels);
        if (!std::isfinite(loss)) {
            throw NumericalError("classifier loss diverged at step " + std::to_string(step));
        }
        result.loss_curve.push_back(loss);
        const MlpGradients grads = backward_cross_entropy(result.net, cache, batch.labels);
        opt.step(result.net, grads);
    }
    return result;
}

double classifier_accuracy(const Mlp& net, const GaussianMixtureOracle& oracle, int n,
                           std::uint64_t seed)
{
    const SampleBatch data = oracle.sample_data(n, seed);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd probs =
            net.forward(data.points.row(i).transpose(), std::nullopt, 0);
        Eigen::Index argmax = 0;
        probs.maxCoeff(&argmax);
        hits += (static_cast<int>(argmax) == data.labels[static_cast<std::size_t>(i)]);
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

Eigen::VectorXd MlpEpsilonModel::predict(const Eigen::VectorXd& x_t, std::optional<int> y,
                                         int t) const
{
    return net_.forward(x_t, y, t);
}

PosteriorReport MlpClassifier::posterior_at(const Eigen::VectorXd& x, int t) const
{
    PosteriorReport report;
    report.probs = net_.forward(x, std::nullopt, t);
    report.entropy = 0.0;
    for (Eigen::Index c = 0; c < report.probs.size(); ++c) {
        const double p = report.probs(c);
        if (p >= 1e-300) {
            report.entropy -= p * std::log(p);
        }
    }
    // No analytic input gradients; guidance falls back to finite differences.
    report.entropy_grad = Eigen::VectorXd();
    return report;
}

} // namespace umst
