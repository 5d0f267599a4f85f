// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace umst {

/// Acquisition protocol: expected unattenuated photons per ray, number of
/// projection angles and the angular range in degrees.
struct ProtocolSpec {
    std::string name;
    double photon_count = 0.0;
    int view_count = 0;
    double angle_start_deg = 0.0;
    double angle_end_deg = 360.0;
    bool noiseless = false;

    static ProtocolSpec ldct();  // 1.25e4 photons, 512 views, [0, 360]
    static ProtocolSpec svct();  // 1.25e8 photons,  60 views, [0, 360]
    static ProtocolSpec lact();  // 1.25e8 photons, 512 views, [0, 125]
    static ProtocolSpec ideal(); // 512 views, [0, 360], no photon noise
    static ProtocolSpec by_name(const std::string& name);

    void validate() const;
};

/// Square grid of attenuation values (nominal range [0, 1]). pixel_size is
/// the physical edge length of one pixel; line integrals are measured in
/// attenuation-length units, i.e. pixel value times physical length.
struct CTImage {
    int width = 0;
    int height = 0;
    double pixel_size = 1.0;
    Eigen::MatrixXd pixels; // height x width, row 0 is the top

    static CTImage zero(int size, double pixel_size = 1.0);
};

/// Parallel-beam projection data: one row per view, one column per detector.
struct Sinogram {
    Eigen::MatrixXd values;     // views x detectors, attenuation-length units
    std::vector<double> angles; // radians, strictly increasing
    double detector_spacing = 1.0; // physical units
};

/// Parallel-beam forward projection by ray traversal: for every view angle
/// (uniformly spaced, half-open over the protocol range) and detector offset,
/// the line integral is accumulated at half-pixel steps with bilinear
/// interpolation. detectors must cover the image diagonal.
Sinogram forward_project(const CTImage& img, const ProtocolSpec& spec, int detectors);

/// Photon statistics per ray: lambda = alpha * exp(-p), counts ~ Poisson,
/// noisy integral ln(alpha / max(counts, 1)). The zero-count clamp is the
/// usual photon-starvation convention. Deterministic per seed with
/// ray-indexed substreams.
Sinogram apply_photon_noise(const Sinogram& sino, double alpha, std::uint64_t seed);

enum class FbpWindow { ramlak, hann };

/// Filtered backprojection: the band-limited ramp kernel is applied per view
/// in the frequency domain with zero-padding to the next power of two at
/// least twice the detector count, then backprojected with linear detector
/// interpolation. Angular weight is pi / views for full scans and
/// range / views for limited ranges.
CTImage fbp_reconstruct(const Sinogram& sino, int out_size,
                        FbpWindow window = FbpWindow::ramlak);

/// forward_project -> apply_photon_noise -> fbp_reconstruct with the default
/// detector count ceil(sqrt(2) * width). The ideal protocol skips the noise.
CTImage simulate_protocol(const CTImage& img, const ProtocolSpec& spec, std::uint64_t seed);

enum class PhantomKind { disk, shepp_logan, checker };

PhantomKind phantom_kind_from_string(const std::string& name);
std::string to_string(PhantomKind kind);

/// Analytic phantoms rasterized with 4x4 subpixel antialiasing. Physical
/// scale is chosen so the image width spans 4 attenuation lengths, which
/// keeps photon statistics in a realistic regime.
CTImage make_phantom(PhantomKind kind, int size);

/// Disk with explicit geometry (pixel units, origin at the image center).
CTImage make_disk_phantom(int size, double cx, double cy, double radius, double value,
                          double pixel_size = 1.0);

/// 16-bit binary PGM (P5) plus a text sidecar `<path>.txt` recording the
/// normalization window `lo hi` used for quantization.
void write_pgm16(const std::filesystem::path& path, const CTImage& img);
CTImage read_pgm16(const std::filesystem::path& path);

/// Raw 64-bit little-endian values preceded by one JSON header line
/// {views, detectors, angle_start, angle_end} (degrees).
void write_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram(const std::filesystem::path& path);

} // namespace umst
