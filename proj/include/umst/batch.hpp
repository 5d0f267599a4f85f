// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace umst {

enum class Stage { data, class_guided, inverted_noise, uncertainty_guided };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

/// A batch of generated or sampled points with class labels, per-point
/// posterior entropy and provenance.
struct SampleBatch {
    Eigen::MatrixXd points;       // n x d, row per point
    std::vector<int> labels;      // target class per point
    Eigen::VectorXd entropies;    // posterior entropy per point (may be empty)
    Stage stage = Stage::data;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
};

/// CSV layout: header row `idx,label,stage,entropy,x0..x{d-1}`.
void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch);
SampleBatch read_batch_csv(const std::filesystem::path& path);

} // namespace umst
