#pragma once

#include <span>

namespace dynvine {

/// Kendall's tau_a, (concordant - discordant) / (n choose 2), in O(n log n).
/// Tied pairs count as neither concordant nor discordant.
double empirical_kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace dynvine
