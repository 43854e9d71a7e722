#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dtwin {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for an independent child stream.
///
/// Streams are addressed by a tag naming their purpose ("cohort", "mcmc",
/// "frozen", ...) and an index (patient, chain, restart). The child seed is
/// splitmix64 applied to the master seed mixed with an FNV-1a hash of the tag
/// and then with the index, so a stream never depends on how many other
/// streams were drawn before it or on which thread draws it.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view tag,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, index));
}

/// Uniform on the open interval (0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Standard normal draw by inversion (bitwise reproducible across
/// standard libraries, unlike std::normal_distribution).
double standard_normal(Rng& rng);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace dtwin
