#pragma once

#include <cstdint>
#include <vector>

namespace stvf {

// Plan for one path worth of Brownian increments. Identical plans produce
// bit-identical increments on every platform and for any worker layout:
// generation is stateless, keyed by (master_seed, path_index, step).
struct NoisePlan {
    int steps = 0;                  // N
    double tau = 0.0;               // step size, > 0
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
};

// SplitMix64 output function (Stafford mix 13). Serves as the documented
// integer mixing primitive for seed derivation and counter hashing.
std::uint64_t mix64(std::uint64_t z) noexcept;

// Per-path stream key: two mixing rounds over (master_seed, path_index).
std::uint64_t derive_stream(std::uint64_t master_seed,
                            std::uint64_t path_index) noexcept;

// k-th uniform draw of a stream, in the open interval (0,1), 53-bit grain.
double uniform_draw(std::uint64_t stream, std::uint64_t counter) noexcept;

// Inverse normal CDF (Wichura's algorithm AS 241, double precision).
// Requires p in (0,1).
double normal_quantile(double p);

// N independent draws from Normal(0, tau) via the inverse-CDF transform of
// the counter-based uniform stream. Reproducibility does not depend on call
// order or consumption patterns.
std::vector<double> sample_increments(const NoisePlan& plan);

// All-zero increments: turns the scheme into the deterministic regularized
// TV flow.
std::vector<double> degenerate_increments(int steps);

// FNV-1a over the raw bytes of the increment array; used to assert that a
// coupled pair of processes consumed the identical noise.
std::uint64_t increments_checksum(const std::vector<double>& increments) noexcept;

}  // namespace stvf
