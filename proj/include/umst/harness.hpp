// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "umst/manifest.hpp"

#include <filesystem>

namespace umst {

/// For every configured phantom x protocol: writes the clean sinogram, the
/// noisy sinogram, the FBP reconstruction and one metrics.csv row measured
/// against the ideal-protocol reconstruction. Files are named
/// {phantom}_{protocol}.{ext}.
void run_simulate(const ExperimentManifest& manifest, const std::filesystem::path& out_dir);

/// Trains the toy denoiser and classifier on the oracle world; writes
/// denoiser.umsn / classifier.umsn checkpoints, per-step loss curves and a
/// training summary (final losses, clean-data classifier accuracy).
void run_train(const ExperimentManifest& manifest, const std::filesystem::path& out_dir);

/// Runs the three-stage generation recipe and writes stage_{a,b,c}.csv plus
/// entropy_summary.csv (per-stage mean entropy with 99% bootstrap intervals).
/// generation.model = "trained" loads checkpoints from out_dir.
void run_ums(const ExperimentManifest& manifest, const std::filesystem::path& out_dir);

/// Emits gnuplot-ready whitespace-separated data from prior runs: entropy
/// histograms and 2-D scatters per stage, metric bars per protocol. Missing
/// inputs are reported exhaustively.
void run_report(const std::filesystem::path& results_dir);

/// Appends the run log (manifest hash, wall time, toolkit version). This is
/// the only output file allowed to differ between identical runs.
void write_run_log(const ExperimentManifest& manifest, const std::filesystem::path& out_dir,
                   const std::string& verb, double wall_seconds);

} // namespace umst
