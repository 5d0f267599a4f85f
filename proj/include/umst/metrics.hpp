// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "umst/batch.hpp"
#include "umst/ctsim.hpp"

#include <Eigen/Dense>

#include <string>

namespace umst {

/// Image-quality summary for one reconstruction. psnr_db is +infinity for
/// identical images; serialization caps it at 99 dB.
struct MetricReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double noise_sd = 0.0;
    int n_pixels = 0;
};

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const CTImage& a, const CTImage& b, double peak = 1.0);

/// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1 = 0.01, K2 = 0.03,
/// peak 1, evaluated over the valid interior (no padding).
double ssim(const CTImage& a, const CTImage& b);

using RoiMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Population standard deviation of (recon - reference) over the ROI.
double noise_sd(const CTImage& recon, const CTImage& reference, const RoiMask& roi);

/// Inscribed-circle field-of-view mask, the default NoiseSD region.
RoiMask fov_mask(int height, int width);

MetricReport metric_report(const CTImage& recon, const CTImage& reference);

/// Serialized PSNR with the 99 dB cap applied.
double capped_psnr_db(double psnr_db);

/// One results-CSV row: image_id,protocol,method,psnr_db,ssim,noise_sd.
std::string metric_csv_row(const std::string& image_id, const std::string& protocol,
                           const std::string& method, const MetricReport& report);

struct EntropyStats {
    double mean = 0.0;
    double stddev = 0.0;
    Eigen::VectorXd deciles; // 10%..90%
};

EntropyStats batch_entropy_stats(const SampleBatch& batch);

} // namespace umst
