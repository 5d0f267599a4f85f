// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/ctsim.hpp"

#include "umst/common.hpp"
#include "umst/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <json.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace umst {

ProtocolSpec ProtocolSpec::ldct()
{
    return ProtocolSpec{"LDCT", 1.25e4, 512, 0.0, 360.0, false};
}

ProtocolSpec ProtocolSpec::svct()
{
    return ProtocolSpec{"SVCT", 1.25e8, 60, 0.0, 360.0, false};
}

ProtocolSpec ProtocolSpec::lact()
{
    return ProtocolSpec{"LACT", 1.25e8, 512, 0.0, 125.0, false};
}

ProtocolSpec ProtocolSpec::ideal()
{
    return ProtocolSpec{"ideal", 1.25e8, 512, 0.0, 360.0, true};
}

ProtocolSpec ProtocolSpec::by_name(const std::string& name)
{
    if (name == "LDCT") return ldct();
    if (name == "SVCT") return svct();
    if (name == "LACT") return lact();
    if (name == "ideal") return ideal();
    throw ManifestError("unknown protocol: " + name);
}

void ProtocolSpec::validate() const
{
    if (!(photon_count > 0.0) || view_count < 1 || !(angle_start_deg >= 0.0) ||
        !(angle_start_deg < angle_end_deg) || !(angle_end_deg <= 360.0)) {
        throw ManifestError("invalid protocol parameters for " + name);
    }
}

CTImage CTImage::zero(int size, double pixel_size)
{
    CTImage img;
    img.width = size;
    img.height = size;
    img.pixel_size = pixel_size;
    img.pixels = Eigen::MatrixXd::Zero(size, size);
    return img;
}

namespace {

constexpr double kDegToRad = M_PI / 180.0;

// Bilinear sample at pixel-centered coordinates with the origin at the image
// center, y pointing up; zero outside the grid.
double sample_bilinear(const CTImage& img, double x, double y)
{
    const double col = x + (img.width - 1) / 2.0;
    const double row = (img.height - 1) / 2.0 - y;
    if (col < 0.0 || row < 0.0 || col > img.width - 1 || row > img.height - 1) {
        return 0.0;
    }
    const int c0 = static_cast<int>(col);
    const int r0 = static_cast<int>(row);
    const int c1 = std::min(c0 + 1, img.width - 1);
    const int r1 = std::min(r0 + 1, img.height - 1);
    const double fc = col - c0;
    const double fr = row - r0;
    return (1 - fr) * ((1 - fc) * img.pixels(r0, c0) + fc * img.pixels(r0, c1)) +
           fr * ((1 - fc) * img.pixels(r1, c0) + fc * img.pixels(r1, c1));
}

std::vector<double> view_angles(const ProtocolSpec& spec)
{
    // Half-open spacing: [start, end) so a full scan does not duplicate 0/360.
    std::vector<double> angles(static_cast<std::size_t>(spec.view_count));
    const double start = spec.angle_start_deg * kDegToRad;
    const double range = (spec.angle_end_deg - spec.angle_start_deg) * kDegToRad;
    for (int i = 0; i < spec.view_count; ++i) {
        angles[static_cast<std::size_t>(i)] = start + range * i / spec.view_count;
    }
    return angles;
}

int next_pow2(int n)
{
    int p = 1;
    while (p < n) {
        p *= 2;
    }
    return p;
}

} // namespace

Sinogram forward_project(const CTImage& img, const ProtocolSpec& spec, int detectors)
{
    spec.validate();
    if (img.width != img.height) {
        throw NumericalError("forward projection expects a square image");
    }
    const double diag = std::sqrt(2.0) * img.width;
    if (detectors < static_cast<int>(std::ceil(diag))) {
        throw NumericalError("detector row must cover the image diagonal");
    }

    Sinogram sino;
    sino.angles = view_angles(spec);
    sino.detector_spacing = img.pixel_size;
    sino.values.resize(spec.view_count, detectors);

    const double step = 0.5; // half-pixel sampling along the ray
    const double half_len = diag / 2.0 + 1.0;
    const int n_steps = static_cast<int>(std::ceil(2.0 * half_len / step));

    for (int vi = 0; vi < spec.view_count; ++vi) {
        const double theta = sino.angles[static_cast<std::size_t>(vi)];
        const double nx = std::cos(theta);
        const double ny = std::sin(theta);
        for (int di = 0; di < detectors; ++di) {
            const double s = di - (detectors - 1) / 2.0; // pixel units
            double acc = 0.0;
            for (int k = 0; k < n_steps; ++k) {
                const double u = -half_len + (k + 0.5) * step;
                acc += sample_bilinear(img, s * nx - u * ny, s * ny + u * nx);
            }
            sino.values(vi, di) = acc * step * img.pixel_size;
        }
    }
    return sino;
}

Sinogram apply_photon_noise(const Sinogram& sino, double alpha, std::uint64_t seed)
{
    if (!(alpha > 0.0)) {
        throw ManifestError("photon count must be positive");
    }
    Sinogram out = sino;
    const Eigen::Index views = sino.values.rows();
    const Eigen::Index dets = sino.values.cols();
    for (Eigen::Index vi = 0; vi < views; ++vi) {
        for (Eigen::Index di = 0; di < dets; ++di) {
            const std::uint64_t ray = static_cast<std::uint64_t>(vi * dets + di);
            Rng rng(derive_seed(seed, "photon", ray));
            const double lambda = alpha * std::exp(-sino.values(vi, di));
            const double counts = static_cast<double>(rng.poisson(lambda));
            out.values(vi, di) = std::log(alpha / std::max(counts, 1.0));
        }
    }
    return out;
}

CTImage fbp_reconstruct(const Sinogram& sino, int out_size, FbpWindow window)
{
    const int views = static_cast<int>(sino.values.rows());
    const int dets = static_cast<int>(sino.values.cols());
    if (views < 1 || dets < 2 || static_cast<int>(sino.angles.size()) != views) {
        throw NumericalError("degenerate sinogram");
    }
    for (std::size_t i = 1; i < sino.angles.size(); ++i) {
        if (!(sino.angles[i] > sino.angles[i - 1])) {
            throw NumericalError("sinogram angles must be strictly increasing");
        }
    }
    const int padded = next_pow2(2 * dets);

    // Band-limited ramp kernel in detector-sample units, wrapped for the FFT:
    // h[0] = 1/4, h[n] = -1/(pi^2 n^2) for odd n, zero for even n.
    std::vector<double> kernel(static_cast<std::size_t>(padded), 0.0);
    kernel[0] = 0.25;
    for (int n = 1; n <= padded / 2; n += 2) {
        const double v = -1.0 / (M_PI * M_PI * n * n);
        kernel[static_cast<std::size_t>(n)] = v;
        kernel[static_cast<std::size_t>(padded - n)] = v;
    }

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> kernel_f;
    fft.fwd(kernel_f, kernel);
    if (window == FbpWindow::hann) {
        for (int k = 0; k < padded; ++k) {
            kernel_f[static_cast<std::size_t>(k)] *=
                0.5 * (1.0 + std::cos(2.0 * M_PI * k / padded));
        }
    }

    // Filter every view: q = (p conv h) / spacing.
    Eigen::MatrixXd filtered(views, dets);
    std::vector<double> row(static_cast<std::size_t>(padded), 0.0);
    std::vector<std::complex<double>> row_f;
    for (int vi = 0; vi < views; ++vi) {
        std::fill(row.begin(), row.end(), 0.0);
        for (int di = 0; di < dets; ++di) {
            row[static_cast<std::size_t>(di)] = sino.values(vi, di);
        }
        fft.fwd(row_f, row);
        for (int k = 0; k < padded; ++k) {
            row_f[static_cast<std::size_t>(k)] *= kernel_f[static_cast<std::size_t>(k)];
        }
        fft.inv(row, row_f);
        for (int di = 0; di < dets; ++di) {
            filtered(vi, di) = row[static_cast<std::size_t>(di)] / sino.detector_spacing;
        }
    }

    const double range =
        sino.angles.empty() ? M_PI
                            : (sino.angles.back() - sino.angles.front()) +
                                  (sino.angles.size() > 1
                                       ? sino.angles[1] - sino.angles[0]
                                       : 0.0);
    const bool full_scan = range > 2.0 * M_PI - 1e-9;
    const double weight = (full_scan ? M_PI : range) / views;

    CTImage out = CTImage::zero(out_size, sino.detector_spacing);
    const double center = (out_size - 1) / 2.0;
    const double det_center = (dets - 1) / 2.0;
    for (int vi = 0; vi < views; ++vi) {
        const double theta = sino.angles[static_cast<std::size_t>(vi)];
        const double nx = std::cos(theta);
        const double ny = std::sin(theta);
        for (int r = 0; r < out_size; ++r) {
            const double y = center - r;
            for (int c = 0; c < out_size; ++c) {
                const double x = c - center;
                const double s = x * nx + y * ny + det_center;
                if (s < 0.0 || s > dets - 1) {
                    continue;
                }
                const int s0 = static_cast<int>(s);
                const int s1 = std::min(s0 + 1, dets - 1);
                const double f = s - s0;
                out.pixels(r, c) += weight * ((1 - f) * filtered(vi, s0) + f * filtered(vi, s1));
            }
        }
    }
    return out;
}

CTImage simulate_protocol(const CTImage& img, const ProtocolSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const int detectors = static_cast<int>(std::ceil(std::sqrt(2.0) * img.width));
    Sinogram sino = forward_project(img, spec, detectors);
    if (!spec.noiseless) {
        sino = apply_photon_noise(sino, spec.photon_count, seed);
    }
    return fbp_reconstruct(sino, img.width);
}

PhantomKind phantom_kind_from_string(const std::string& name)
{
    if (name == "disk") return PhantomKind::disk;
    if (name == "shepp_logan") return PhantomKind::shepp_logan;
    if (name == "checker") return PhantomKind::checker;
    throw ManifestError("unknown phantom kind: " + name);
}

std::string to_string(PhantomKind kind)
{
    switch (kind) {
    case PhantomKind::disk: return "disk";
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::checker: return "checker";
    }
    return "disk";
}

CTImage make_disk_phantom(int size, double cx, double cy, double radius, double value,
                          double pixel_size)
{
    if (size < 32) {
        throw ManifestError("phantom size must be >= 32");
    }
    CTImage img = CTImage::zero(size, pixel_size);
    if (radius <= 0.0) {
        return img;
    }
    const double center = (size - 1) / 2.0;
    const double r2 = radius * radius;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double x = c - center;
            const double y = center - r;
            // 4x4 subpixel coverage
            int inside = 0;
            for (int sy = 0; sy < 4; ++sy) {
                for (int sx = 0; sx < 4; ++sx) {
                    const double dx = x + (sx + 0.5) / 4.0 - 0.5 - cx;
                    const double dy = y + (sy + 0.5) / 4.0 - 0.5 - cy;
                    if (dx * dx + dy * dy <= r2) {
                        ++inside;
                    }
                }
            }
            img.pixels(r, c) = value * inside / 16.0;
        }
    }
    return img;
}

namespace {

struct Ellipse {
    double cx, cy, a, b, phi_deg, intensity;
};

// Modified Shepp-Logan ellipse set, coordinates in [-1, 1].
constexpr Ellipse kSheppLogan[] = {
    {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
    {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
    {0.0, -0.605, 0.023, 0.023, 0.0, 0.1},
    {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
};

} // namespace

CTImage make_phantom(PhantomKind kind, int size)
{
    if (size < 32) {
        throw ManifestError("phantom size must be >= 32");
    }
    const double pixel_size = 4.0 / size; // image width spans 4 attenuation lengths

    switch (kind) {
    case PhantomKind::disk:
        return make_disk_phantom(size, 0.0, 0.0, 0.2 * size, 1.0, pixel_size);

    case PhantomKind::shepp_logan: {
        CTImage img = CTImage::zero(size, pixel_size);
        const double center = (size - 1) / 2.0;
        const double unit = 2.0 / size; // pixels -> [-1, 1]
        double max_val = 0.0;
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                double acc = 0.0;
                for (int sy = 0; sy < 4; ++sy) {
                    for (int sx = 0; sx < 4; ++sx) {
                        const double x = ((c - center) + (sx + 0.5) / 4.0 - 0.5) * unit;
                        const double y = ((center - r) + (sy + 0.5) / 4.0 - 0.5) * unit;
                        double v = 0.0;
                        for (const auto& e : kSheppLogan) {
                            const double ct = std::cos(e.phi_deg * kDegToRad);
                            const double st = std::sin(e.phi_deg * kDegToRad);
                            const double dx = x - e.cx;
                            const double dy = y - e.cy;
                            const double u = (dx * ct + dy * st) / e.a;
                            const double w = (-dx * st + dy * ct) / e.b;
                            if (u * u + w * w <= 1.0) {
                                v += e.intensity;
                            }
                        }
                        acc += std::max(v, 0.0);
                    }
                }
                img.pixels(r, c) = acc / 16.0;
                max_val = std::max(max_val, img.pixels(r, c));
            }
        }
        if (max_val > 0.0) {
            img.pixels /= max_val;
        }
        return img;
    }

    case PhantomKind::checker: {
        CTImage img = CTImage::zero(size, pixel_size);
        const int tile = std::max(size / 8, 1);
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                img.pixels(r, c) = ((r / tile + c / tile) % 2 == 0) ? 0.0 : 1.0;
            }
        }
        return img;
    }
    }
    throw ManifestError("unknown phantom kind");
}

void write_pgm16(const std::filesystem::path& path, const CTImage& img)
{
    double lo = img.pixels.minCoeff();
    double hi = img.pixels.maxCoeff();
    if (!(hi > lo)) {
        hi = lo + 1.0;
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double norm = (img.pixels(r, c) - lo) / (hi - lo);
            const int q = std::clamp(static_cast<int>(std::lround(norm * 65535.0)), 0, 65535);
            const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                            static_cast<unsigned char>(q & 0xff)};
            out.write(reinterpret_cast<const char*>(bytes), 2);
        }
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }

    std::ofstream sidecar(path.string() + ".txt");
    if (!sidecar) {
        throw IoError("cannot open sidecar for writing: " + path.string() + ".txt");
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", lo, hi);
    sidecar << buf;
}

CTImage read_pgm16(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open: " + path.string());
    }
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 65535 || width < 1 || height < 1) {
        throw IoError("unsupported PGM header in " + path.string());
    }
    in.get(); // single whitespace after the header

    double lo = 0.0, hi = 1.0;
    std::ifstream sidecar(path.string() + ".txt");
    if (!sidecar || !(sidecar >> lo >> hi)) {
        throw IoError("missing or malformed sidecar for " + path.string());
    }

    CTImage img = CTImage::zero(width);
    img.height = height;
    img.pixels.resize(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            unsigned char bytes[2];
            in.read(reinterpret_cast<char*>(bytes), 2);
            const int q = (static_cast<int>(bytes[0]) << 8) | bytes[1];
            img.pixels(r, c) = lo + q / 65535.0 * (hi - lo);
        }
    }
    if (!in) {
        throw IoError("truncated PGM: " + path.string());
    }
    return img;
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& sino)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    const double start = sino.angles.empty() ? 0.0 : sino.angles.front() / kDegToRad;
    const double step =
        sino.angles.size() > 1 ? (sino.angles[1] - sino.angles[0]) / kDegToRad : 0.0;
    const double end = start + step * static_cast<double>(sino.angles.size());
    char header[256];
    std::snprintf(header, sizeof(header),
                  "{\"views\": %d, \"detectors\": %d, \"angle_start\": %.17g, "
                  "\"angle_end\": %.17g}\n",
                  static_cast<int>(sino.values.rows()), static_cast<int>(sino.values.cols()),
                  start, end);
    out << header;
    for (Eigen::Index vi = 0; vi < sino.values.rows(); ++vi) {
        for (Eigen::Index di = 0; di < sino.values.cols(); ++di) {
            const double v = sino.values(vi, di);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

Sinogram read_sinogram(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open: " + path.string());
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw IoError("missing sinogram header: " + path.string());
    }
    const nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
    if (j.is_discarded() || !j.contains("views") || !j.contains("detectors") ||
        !j.contains("angle_start") || !j.contains("angle_end")) {
        throw IoError("malformed sinogram header: " + path.string());
    }
    const int views = j["views"].get<int>();
    const int dets = j["detectors"].get<int>();
    const double start = j["angle_start"].get<double>();
    const double end = j["angle_end"].get<double>();

    Sinogram sino;
    sino.detector_spacing = 1.0; // physical spacing is not part of the file format
    sino.values.resize(views, dets);
    sino.angles.resize(static_cast<std::size_t>(views));
    for (int vi = 0; vi < views; ++vi) {
        sino.angles[static_cast<std::size_t>(vi)] =
            (start + (end - start) * vi / views) * kDegToRad;
    }
    for (int vi = 0; vi < views; ++vi) {
        for (int di = 0; di < dets; ++di) {
            double v = 0.0;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            sino.values(vi, di) = v;
        }
    }
    if (!in) {
        throw IoError("truncated sinogram: " + path.string());
    }
    return sino;
}

} // namespace umst
