// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/harness.hpp"

#include "umst/common.hpp"
#include "umst/ctsim.hpp"
#include "umst/metrics.hpp"
#include "umst/mlp.hpp"
#include "umst/rng.hpp"
#include "umst/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

namespace umst {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersionString = "umst 0.1.0";

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    return out;
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

// 99% percentile bootstrap interval of the mean, 2000 resamples.
std::pair<double, double> bootstrap_mean_ci99(const Eigen::VectorXd& values,
                                              std::uint64_t seed)
{
    const int resamples = 2000;
    const Eigen::Index n = values.size();
    Rng rng(seed);
    std::vector<double> means(resamples);
    for (int b = 0; b < resamples; ++b) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index pick =
                std::min<Eigen::Index>(static_cast<Eigen::Index>(rng.uniform() * n), n - 1);
            acc += values(pick);
        }
        means[static_cast<std::size_t>(b)] = acc / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto idx = [&](double q) {
        return means[static_cast<std::size_t>(q * (resamples - 1))];
    };
    return {idx(0.005), idx(0.995)};
}

} // namespace

void run_simulate(const ExperimentManifest& manifest, const fs::path& out_dir)
{
    ensure_dir(out_dir);
    auto metrics_csv = open_out(out_dir / "metrics.csv");
    metrics_csv << "image_id,protocol,method,psnr_db,ssim,noise_sd\n";

    for (const std::string& phantom_name : manifest.world.phantoms) {
        const PhantomKind kind = phantom_kind_from_string(phantom_name);
        const CTImage phantom = make_phantom(kind, manifest.world.image_size);

        const CTImage ideal_recon = simulate_protocol(phantom, ProtocolSpec::ideal(), 0);
        write_pgm16(out_dir / (phantom_name + "_ideal.pgm"), ideal_recon);

        for (const std::string& protocol_name : manifest.world.protocols) {
            const ProtocolSpec protocol = ProtocolSpec::by_name(protocol_name);
            const int detectors =
                static_cast<int>(std::ceil(std::sqrt(2.0) * phantom.width));
            const std::string stem = phantom_name + "_" + protocol_name;

            const Sinogram clean = forward_project(phantom, protocol, detectors);
            write_sinogram(out_dir / (stem + ".sino"), clean);

            Sinogram measured = clean;
            if (!protocol.noiseless) {
                const std::uint64_t seed =
                    derive_seed(manifest.seed, "simulate." + stem, 0);
                measured = apply_photon_noise(clean, protocol.photon_count, seed);
                write_sinogram(out_dir / (stem + ".noisy.sino"), measured);
            }

            const CTImage recon = fbp_reconstruct(measured, phantom.width);
            write_pgm16(out_dir / (stem + ".pgm"), recon);

            const MetricReport report = metric_report(recon, ideal_recon);
            metrics_csv << metric_csv_row(phantom_name, protocol_name, "fbp", report)
                        << "\n";
        }
    }
    if (!metrics_csv) {
        throw IoError("write failed: " + (out_dir / "metrics.csv").string());
    }
}

void run_train(const ExperimentManifest& manifest, const fs::path& out_dir)
{
    ensure_dir(out_dir);
    const GaussianMixtureOracle oracle = build_oracle(manifest.world);
    const NoiseSchedule sched = manifest.schedule.build();
    const TrainingSpec& ts = manifest.training;

    TrainConfig cfg;
    cfg.steps = ts.steps;
    cfg.batch_size = ts.batch_size;
    cfg.adam = AdamConfig{ts.lr, ts.beta1, ts.beta2, 1e-8};
    cfg.timestep_weight = ts.timestep_weight;

    const EmbedSpec denoiser_embed{oracle.dim(), ts.time_embed_width, oracle.num_classes()};
    const EmbedSpec classifier_embed{oracle.dim(), ts.time_embed_width, 0};

    Mlp denoiser = Mlp::make(denoiser_embed, ts.denoiser_hidden, oracle.dim(),
                             Activation::tanh, Activation::identity, false,
                             derive_seed(manifest.seed, "init.denoiser", 0));
    Mlp classifier = Mlp::make(classifier_embed, ts.classifier_hidden, oracle.num_classes(),
                               Activation::tanh, Activation::softmax, true,
                               derive_seed(manifest.seed, "init.classifier", 0));

    const TrainResult den = train_denoiser(std::move(denoiser), oracle, sched, cfg,
                                           derive_seed(manifest.seed, "train.denoiser", 0));
    const TrainResult cls = train_classifier(std::move(classifier), oracle, sched, cfg,
                                             derive_seed(manifest.seed, "train.classifier", 0));

    den.net.save(out_dir / "denoiser.umsn");
    cls.net.save(out_dir / "classifier.umsn");

    const auto write_curve = [&](const fs::path& path, const std::vector<double>& curve) {
        auto out = open_out(path);
        out << "step,loss\n";
        for (std::size_t i = 0; i < curve.size(); ++i) {
            out << i << ',' << fmt(curve[i]) << "\n";
        }
    };
    write_curve(out_dir / "denoiser_loss.csv", den.loss_curve);
    write_curve(out_dir / "classifier_loss.csv", cls.loss_curve);

    const double accuracy = classifier_accuracy(
        cls.net, oracle, 2000, derive_seed(manifest.seed, "train.eval", 0));
    auto summary = open_out(out_dir / "training_summary.csv");
    summary << "net,final_loss,clean_accuracy\n";
    summary << "denoiser," << fmt(den.loss_curve.empty() ? 0.0 : den.loss_curve.back())
            << ",\n";
    summary << "classifier," << fmt(cls.loss_curve.empty() ? 0.0 : cls.loss_curve.back())
            << ',' << fmt(accuracy) << "\n";
}

void run_ums(const ExperimentManifest& manifest, const fs::path& out_dir)
{
    ensure_dir(out_dir);
    const GaussianMixtureOracle oracle = build_oracle(manifest.world);
    const NoiseSchedule sched = manifest.schedule.build();
    const GenerationSpec& gen = manifest.generation;

    std::unique_ptr<EpsilonModel> model;
    std::unique_ptr<Classifier> classifier;
    if (gen.model == "oracle") {
        model = std::make_unique<OracleEpsilonModel>(oracle, sched);
        classifier = std::make_unique<OracleClassifier>(oracle, sched);
    } else {
        const fs::path den_path = out_dir / "denoiser.umsn";
        const fs::path cls_path = out_dir / "classifier.umsn";
        std::vector<std::string> missing;
        if (!fs::exists(den_path)) missing.push_back(den_path.string());
        if (!fs::exists(cls_path)) missing.push_back(cls_path.string());
        if (!missing.empty()) {
            std::string msg = "trained model selected but checkpoints are missing:";
            for (const auto& m : missing) msg += " " + m;
            throw IoError(msg + " (run the train verb first)");
        }
        const EmbedSpec den_embed{oracle.dim(), manifest.training.time_embed_width,
                                  oracle.num_classes()};
        const EmbedSpec cls_embed{oracle.dim(), manifest.training.time_embed_width, 0};
        model = std::make_unique<MlpEpsilonModel>(Mlp::load(den_path, den_embed));
        classifier = std::make_unique<MlpClassifier>(Mlp::load(cls_path, cls_embed));
    }

    const UmsResult result = ums_generate(
        *model, *classifier, sched, gen.n_per_class, gen.class_scale, gen.uncertainty_scale,
        derive_seed(manifest.seed, "ums", 0),
        gradient_source_from_string(gen.gradient_source));

    write_batch_csv(out_dir / "stage_a.csv", result.stage_a);
    write_batch_csv(out_dir / "stage_b.csv", result.stage_b);
    write_batch_csv(out_dir / "stage_c.csv", result.stage_c);

    auto summary = open_out(out_dir / "entropy_summary.csv");
    summary << "stage,mean_entropy,std_entropy,ci99_lo,ci99_hi\n";
    const auto row = [&](const SampleBatch& batch, std::uint64_t idx) {
        const EntropyStats stats = batch_entropy_stats(batch);
        const auto [lo, hi] = bootstrap_mean_ci99(
            batch.entropies, derive_seed(manifest.seed, "ums.bootstrap", idx));
        summary << to_string(batch.stage) << ',' << fmt(stats.mean) << ','
                << fmt(stats.stddev) << ',' << fmt(lo) << ',' << fmt(hi) << "\n";
    };
    row(result.stage_a, 0);
    row(result.stage_b, 1);
    row(result.stage_c, 2);
}

void run_report(const fs::path& results_dir)
{
    const std::vector<std::string> stage_files = {"stage_a.csv", "stage_b.csv",
                                                  "stage_c.csv"};
    std::vector<std::string> missing;
    for (const auto& f : stage_files) {
        if (!fs::exists(results_dir / f)) {
            missing.push_back(f);
        }
    }
    if (!fs::exists(results_dir / "metrics.csv")) {
        missing.push_back("metrics.csv");
    }
    if (!missing.empty()) {
        std::string msg = "report inputs missing in " + results_dir.string() + ":";
        for (const auto& m : missing) {
            msg += " " + m;
        }
        throw IoError(msg);
    }

    std::vector<SampleBatch> batches;
    double max_entropy = 0.0;
    for (const auto& f : stage_files) {
        batches.push_back(read_batch_csv(results_dir / f));
        if (batches.back().entropies.size() > 0) {
            max_entropy = std::max(max_entropy, batches.back().entropies.maxCoeff());
        }
    }
    if (max_entropy <= 0.0) {
        max_entropy = 1.0;
    }

    const int bins = 24;
    for (std::size_t s = 0; s < batches.size(); ++s) {
        const std::string tag = std::string(1, static_cast<char>('a' + s));
        const SampleBatch& batch = batches[s];

        std::vector<long> hist(static_cast<std::size_t>(bins), 0);
        for (Eigen::Index i = 0; i < batch.entropies.size(); ++i) {
            int bin = static_cast<int>(batch.entropies(i) / max_entropy * bins);
            bin = std::clamp(bin, 0, bins - 1);
            ++hist[static_cast<std::size_t>(bin)];
        }
        auto hist_out = open_out(results_dir / ("entropy_hist_stage_" + tag + ".dat"));
        hist_out << "# bin_center count\n";
        for (int b = 0; b < bins; ++b) {
            hist_out << fmt((b + 0.5) * max_entropy / bins) << ' '
                     << hist[static_cast<std::size_t>(b)] << "\n";
        }

        auto scatter_out = open_out(results_dir / ("scatter_stage_" + tag + ".dat"));
        scatter_out << "# x0 x1 label\n";
        for (int i = 0; i < batch.size(); ++i) {
            const double x0 = batch.points(i, 0);
            const double x1 = batch.dim() > 1 ? batch.points(i, 1) : 0.0;
            scatter_out << fmt(x0) << ' ' << fmt(x1) << ' '
                        << batch.labels[static_cast<std::size_t>(i)] << "\n";
        }
    }

    // Metric bars: pass the CSV rows through as whitespace-separated columns.
    std::ifstream metrics_in(results_dir / "metrics.csv");
    std::string line;
    std::getline(metrics_in, line); // header
    auto bars = open_out(results_dir / "metric_bars.dat");
    bars << "# image_id protocol psnr_db ssim noise_sd\n";
    while (std::getline(metrics_in, line)) {
        if (line.empty()) {
            continue;
        }
        std::string id, protocol, method, psnr_s, ssim_s, noise_s;
        std::stringstream ss(line);
        std::getline(ss, id, ',');
        std::getline(ss, protocol, ',');
        std::getline(ss, method, ',');
        std::getline(ss, psnr_s, ',');
        std::getline(ss, ssim_s, ',');
        std::getline(ss, noise_s, ',');
        bars << id << ' ' << protocol << ' ' << psnr_s << ' ' << ssim_s << ' ' << noise_s
             << "\n";
    }
}

void write_run_log(const ExperimentManifest& manifest, const fs::path& out_dir,
                   const std::string& verb, double wall_seconds)
{
    ensure_dir(out_dir);
    std::ofstream out(out_dir / "run_log.txt", std::ios::app);
    if (!out) {
        throw IoError("cannot open run log in " + out_dir.string());
    }
    out << verb << " manifest=" << manifest_hash(manifest) << " wall_s=" << wall_seconds
        << " version=\"" << kVersionString << "\"\n";
}

} // namespace umst
