#pragma once

#include "partmi/exact.hpp"
#include "partmi/partition.hpp"

#include <vector>

namespace partmi {

/// Per-chain and pooled visit frequencies over the union support of C
/// chains. Rows of per_chain sum to 1; pooled is the chain-weight average
/// of the rows (weights proportional to retained sample counts, equal for
/// equal-length chains).
struct FrequencyProfile {
    std::vector<Partition> support;              // Q partitions
    std::vector<std::vector<double>> per_chain;  // C x Q
    std::vector<double> pooled;                  // Q
    std::vector<double> chain_weights;           // C, sums to 1

    std::size_t chain_count() const { return per_chain.size(); }
    std::size_t support_size() const { return support.size(); }
};

/// Between-chain heterogeneity: the average L1 distance between each chain's
/// frequency vector and the pooled one,
///   (1/C) sum_c sum_q |f_cq - f_.q|.
/// Zero exactly when all chains estimate the same frequencies; at most
/// 2(C-1)/C, attained by degenerate chains on C distinct states.
double heterogeneity(const FrequencyProfile& profile);

/// L1 distance between two probability tables over the union of their
/// supports; ranges over [0, 2] with 2 for disjoint supports.
double run_distance(const PosteriorTable& a, const PosteriorTable& b);

} // namespace partmi
