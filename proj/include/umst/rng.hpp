// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace umst {

/// Deterministic counter-style random stream (splitmix64 core).
///
/// The standard-library distributions are implementation-defined, so every
/// stochastic operation in the toolkit draws through this class instead.
/// Gaussian variates use Box-Muller, Poisson variates use exact inversion
/// for small means and Hormann's PTRD transformed rejection otherwise.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform draw in (0, 1]; never returns 0 so logs stay finite.
    double uniform();

    /// Standard normal draw.
    double normal();

    /// Poisson draw with mean lambda >= 0.
    std::uint64_t poisson(double lambda);

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent child seed from (root seed, operation tag, index).
/// Chains, rays and other parallelizable tasks each get their own stream so
/// results do not depend on execution order.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index);

} // namespace umst
