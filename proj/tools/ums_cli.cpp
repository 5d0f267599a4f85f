// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/common.hpp"
#include "umst/ctsim.hpp"
#include "umst/harness.hpp"
#include "umst/manifest.hpp"
#include "umst/metrics.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

namespace fs = std::filesystem;

struct GlobalOpts {
    std::string manifest_path;
    std::string out_dir;
    bool seed_set = false;
    std::uint64_t seed = 0;
};

umst::ExperimentManifest resolve_manifest(const GlobalOpts& opts)
{
    umst::ExperimentManifest manifest = opts.manifest_path.empty()
                                            ? umst::default_manifest()
                                            : umst::load_manifest(opts.manifest_path);
    if (opts.seed_set) {
        manifest.seed = opts.seed;
    }
    if (!opts.out_dir.empty()) {
        manifest.outputs = opts.out_dir;
    }
    return manifest;
}

int run_verb(const GlobalOpts& opts, const std::string& verb)
{
    const umst::ExperimentManifest manifest = resolve_manifest(opts);
    const fs::path out_dir = manifest.outputs;
    const auto start = std::chrono::steady_clock::now();

    if (verb == "simulate") {
        umst::run_simulate(manifest, out_dir);
    } else if (verb == "train") {
        umst::run_train(manifest, out_dir);
    } else if (verb == "ums") {
        umst::run_ums(manifest, out_dir);
    } else if (verb == "report") {
        umst::run_report(out_dir);
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    umst::write_run_log(manifest, out_dir, verb, wall);
    std::cout << verb << " done, outputs in " << out_dir.string() << "\n";
    return 0;
}

int run_eval(const std::string& ref_path, const std::string& test_path,
             const std::string& csv_path, const std::string& id, const std::string& protocol,
             const std::string& method)
{
    const umst::CTImage ref = umst::read_pgm16(ref_path);
    const umst::CTImage test = umst::read_pgm16(test_path);
    const umst::MetricReport report = umst::metric_report(test, ref);
    const std::string row = umst::metric_csv_row(id, protocol, method, report);
    std::cout << "image_id,protocol,method,psnr_db,ssim,noise_sd\n" << row << "\n";
    if (!csv_path.empty()) {
        const bool fresh = !fs::exists(csv_path);
        std::ofstream out(csv_path, std::ios::app);
        if (!out) {
            throw umst::IoError("cannot open CSV for appending: " + csv_path);
        }
        if (fresh) {
            out << "image_id,protocol,method,psnr_db,ssim,noise_sd\n";
        }
        out << row << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Diffusion-guidance and CT-simulation toolkit"};
    app.require_subcommand(1);

    GlobalOpts opts;
    app.add_option("--manifest", opts.manifest_path, "Experiment manifest (JSON)");
    app.add_option("--out", opts.out_dir, "Output directory (overrides manifest)");
    auto* seed_opt = app.add_option("--seed", opts.seed, "Root seed (overrides manifest)");

    app.add_subcommand("simulate", "CT protocol simulation: sinograms, FBP, metrics")
        ->fallthrough();
    app.add_subcommand("train", "Train the toy denoiser and classifier")->fallthrough();
    app.add_subcommand("ums", "Three-stage guided generation")->fallthrough();
    app.add_subcommand("report", "Emit gnuplot data from prior runs")->fallthrough();

    auto* eval_cmd = app.add_subcommand("eval", "Image-quality metrics for a PGM pair");
    std::string ref_path, test_path, csv_path, id = "image", protocol = "custom",
                                               method = "fbp";
    eval_cmd->add_option("--ref", ref_path, "Reference image (16-bit PGM)")->required();
    eval_cmd->add_option("--test", test_path, "Image under test (16-bit PGM)")->required();
    eval_cmd->add_option("--csv", csv_path, "Append the result row to this CSV");
    eval_cmd->add_option("--id", id, "image_id column value");
    eval_cmd->add_option("--protocol", protocol, "protocol column value");
    eval_cmd->add_option("--method", method, "method column value");

    try {
        app.parse(argc, argv);
        opts.seed_set = seed_opt->count() > 0;

        const std::string verb = app.get_subcommands().front()->get_name();
        if (verb == "eval") {
            return run_eval(ref_path, test_path, csv_path, id, protocol, method);
        }
        return run_verb(opts, verb);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const umst::ManifestError& e) {
        std::cerr << "manifest error: " << e.what() << "\n";
        return 2;
    } catch (const umst::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const umst::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
