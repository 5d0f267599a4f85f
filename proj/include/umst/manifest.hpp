// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "umst/oracle.hpp"
#include "umst/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace umst {

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::linear;
    int steps = 50;
    double beta_min = 0.02;
    double beta_max = 0.38;

    NoiseSchedule build() const { return make_schedule(kind, steps, beta_min, beta_max); }
    bool operator==(const ScheduleSpec&) const = default;
};

struct OracleComponentSpec {
    std::vector<double> mean;
    std::vector<std::vector<double>> covariance;
    int label = 0;
    double weight = 0.0;

    bool operator==(const OracleComponentSpec&) const = default;
};

struct WorldSpec {
    std::vector<OracleComponentSpec> oracle;
    std::vector<std::string> phantoms = {"disk", "shepp_logan"};
    std::vector<std::string> protocols = {"LDCT", "SVCT", "LACT"};
    int image_size = 128;

    bool operator==(const WorldSpec&) const = default;
};

struct TrainingSpec {
    int steps = 2000;
    int batch_size = 64;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::vector<int> denoiser_hidden = {64, 64};
    std::vector<int> classifier_hidden = {64, 64};
    int time_embed_width = 16;
    double timestep_weight = 1.0;

    bool operator==(const TrainingSpec&) const = default;
};

struct GenerationSpec {
    double class_scale = 10.0;
    double uncertainty_scale = 3.0;
    int n_per_class = 100;
    std::string model = "oracle";              // oracle | trained
    std::string gradient_source = "analytic";  // analytic | finite_difference

    bool operator==(const GenerationSpec&) const = default;
};

/// Calibrated inversion-roundtrip configuration; the acceptance checks read
/// the step count and tolerance from here.
struct RoundtripSpec {
    ScheduleSpec schedule{ScheduleKind::linear, 50, 1e-4, 0.02};
    double tolerance = 1e-2;

    bool operator==(const RoundtripSpec&) const = default;
};

/// Root configuration of every pipeline run. Parsing is strict: unknown keys
/// are rejected rather than ignored; missing keys take the defaults above.
/// Every stochastic operation derives its stream from the single root seed.
struct ExperimentManifest {
    int version = 1;
    std::uint64_t seed = 1234;
    ScheduleSpec schedule;
    WorldSpec world;
    TrainingSpec training;
    GenerationSpec generation;
    RoundtripSpec roundtrip;
    std::string outputs = "out";

    bool operator==(const ExperimentManifest&) const = default;
};

/// Defaults plus the three-class oracle world.
ExperimentManifest default_manifest();

ExperimentManifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const ExperimentManifest& manifest);

ExperimentManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const ExperimentManifest& manifest);

GaussianMixtureOracle build_oracle(const WorldSpec& world);

/// FNV-1a hash of the canonical serialization, hex-encoded (for the run log).
std::string manifest_hash(const ExperimentManifest& manifest);

} // namespace umst
