// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/metrics.hpp"

#include "umst/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace umst {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void check_shapes(const CTImage& a, const CTImage& b)
{
    if (a.width != b.width || a.height != b.height) {
        throw NumericalError("image shape mismatch");
    }
}

Eigen::VectorXd gaussian_window()
{
    Eigen::VectorXd w(kWindow);
    const int half = kWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - half;
        w(i) = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += w(i);
    }
    return w / sum;
}

// Separable valid-region Gaussian filter: output is (H-10) x (W-10).
Eigen::MatrixXd gauss_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& w)
{
    const Eigen::Index rows = img.rows();
    const Eigen::Index cols = img.cols();
    Eigen::MatrixXd tmp(rows, cols - kWindow + 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c + kWindow <= cols; ++c) {
            tmp(r, c) = img.row(r).segment(c, kWindow).dot(w);
        }
    }
    Eigen::MatrixXd out(rows - kWindow + 1, cols - kWindow + 1);
    for (Eigen::Index c = 0; c < tmp.cols(); ++c) {
        for (Eigen::Index r = 0; r + kWindow <= rows; ++r) {
            out(r, c) = tmp.col(c).segment(r, kWindow).dot(w);
        }
    }
    return out;
}

} // namespace

double psnr(const CTImage& a, const CTImage& b, double peak)
{
    check_shapes(a, b);
    const double mse = (a.pixels - b.pixels).squaredNorm() /
                       static_cast<double>(a.pixels.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const CTImage& a, const CTImage& b)
{
    check_shapes(a, b);
    if (a.width < kWindow || a.height < kWindow) {
        throw NumericalError("images smaller than the SSIM window");
    }
    const double c1 = kK1 * kK1; // (K1 * peak)^2, peak = 1
    const double c2 = kK2 * kK2;

    const Eigen::VectorXd w = gaussian_window();
    const Eigen::MatrixXd mu_a = gauss_valid(a.pixels, w);
    const Eigen::MatrixXd mu_b = gauss_valid(b.pixels, w);
    const Eigen::MatrixXd aa = gauss_valid(a.pixels.cwiseProduct(a.pixels), w);
    const Eigen::MatrixXd bb = gauss_valid(b.pixels.cwiseProduct(b.pixels), w);
    const Eigen::MatrixXd ab = gauss_valid(a.pixels.cwiseProduct(b.pixels), w);

    double acc = 0.0;
    for (Eigen::Index r = 0; r < mu_a.rows(); ++r) {
        for (Eigen::Index c = 0; c < mu_a.cols(); ++c) {
            const double ma = mu_a(r, c);
            const double mb = mu_b(r, c);
            const double va = aa(r, c) - ma * ma;
            const double vb = bb(r, c) - mb * mb;
            const double cov = ab(r, c) - ma * mb;
            const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
        }
    }
    return acc / static_cast<double>(mu_a.size());
}

double noise_sd(const CTImage& recon, const CTImage& reference, const RoiMask& roi)
{
    check_shapes(recon, reference);
    if (roi.rows() != recon.pixels.rows() || roi.cols() != recon.pixels.cols()) {
        throw NumericalError("ROI shape mismatch");
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    long count = 0;
    for (Eigen::Index r = 0; r < roi.rows(); ++r) {
        for (Eigen::Index c = 0; c < roi.cols(); ++c) {
            if (!roi(r, c)) {
                continue;
            }
            const double d = recon.pixels(r, c) - reference.pixels(r, c);
            sum += d;
            sum_sq += d * d;
            ++count;
        }
    }
    if (count == 0) {
        throw NumericalError("empty ROI");
    }
    const double mean = sum / count;
    const double var = std::max(sum_sq / count - mean * mean, 0.0);
    return std::sqrt(var);
}

RoiMask fov_mask(int height, int width)
{
    RoiMask mask(height, width);
    const double cy = (height - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const double radius = std::min(width, height) / 2.0;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double dx = c - cx;
            const double dy = r - cy;
            mask(r, c) = dx * dx + dy * dy <= radius * radius;
        }
    }
    return mask;
}

MetricReport metric_report(const CTImage& recon, const CTImage& reference)
{
    MetricReport report;
    report.psnr_db = psnr(recon, reference);
    report.ssim = ssim(recon, reference);
    report.noise_sd = noise_sd(recon, reference, fov_mask(recon.height, recon.width));
    report.n_pixels = recon.width * recon.height;
    return report;
}

double capped_psnr_db(double psnr_db)
{
    return std::min(psnr_db, 99.0);
}

std::string metric_csv_row(const std::string& image_id, const std::string& protocol,
                           const std::string& method, const MetricReport& report)
{
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.17g,%.17g,%.17g", image_id.c_str(),
                  protocol.c_str(), method.c_str(), capped_psnr_db(report.psnr_db),
                  report.ssim, report.noise_sd);
    return buf;
}

EntropyStats batch_entropy_stats(const SampleBatch& batch)
{
    if (batch.entropies.size() == 0) {
        throw NumericalError("batch has no entropies");
    }
    EntropyStats stats;
    const Eigen::Index n = batch.entropies.size();
    stats.mean = batch.entropies.mean();
    stats.stddev = std::sqrt((batch.entropies.array() - stats.mean).square().sum() /
                             static_cast<double>(n));

    std::vector<double> sorted(batch.entropies.data(), batch.entropies.data() + n);
    std::sort(sorted.begin(), sorted.end());
    stats.deciles.resize(9);
    for (int q = 1; q <= 9; ++q) {
        // Linear interpolation between order statistics.
        const double pos = q / 10.0 * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double f = pos - static_cast<double>(lo);
        stats.deciles(q - 1) = (1.0 - f) * sorted[lo] + f * sorted[hi];
    }
    return stats;
}

} // namespace umst
