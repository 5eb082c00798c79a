#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace partmi {

/// Exact 128-bit counts. Bell(30) ~ 8.5e23 still fits with plenty of room.
using uint128 = unsigned __int128;

/// Largest set size for which exact integer counts are provided.
inline constexpr int kMaxExactCount = 30;

/// Number of partitions of a d-element set. Requires 0 <= d <= 30.
uint128 bell(int d);

/// Number of partitions of an a-element set into exactly b blocks.
/// Requires 0 <= b <= a <= 30.
uint128 stirling2(int a, int b);

/// Log-domain variants for sizes beyond the exact range.
double log_bell(int d);
double log_stirling2(int a, int b);

/// Distribution of the block count K = 1..d under the uniform prior on
/// partitions: entry K-1 equals stirling2(d,K)/bell(d).
std::vector<double> block_count_prior(int d);

std::string to_decimal_string(uint128 value);

} // namespace partmi
