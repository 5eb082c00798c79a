#pragma once

#include "partmi/models.hpp"
#include "partmi/partition.hpp"

#include <functional>
#include <vector>

namespace partmi {

enum class PosteriorMode { exact, sampled };

/// Probability table over partitions: the full solution space in exact mode,
/// the observed support in sampled mode. Parallel arrays, probabilities
/// normalized to 1.
struct PosteriorTable {
    std::vector<Partition> partitions;
    std::vector<double> probs;
    int d = 0;
    PosteriorMode mode = PosteriorMode::exact;

    std::size_t size() const { return partitions.size(); }

    /// Index of the maximum a posteriori partition; ties broken by
    /// lexicographic RGS order.
    std::size_t map_index() const;

    /// Indices sorted by decreasing probability (ties by RGS order).
    std::vector<std::size_t> order_by_probability() const;
};

/// Score every partition of a d-element set and normalize with a max-shifted
/// log-sum-exp (pairwise tree reduction, deterministic for any worker count).
/// workers = 0 uses all hardware threads.
PosteriorTable exact_posterior(const ModelScorer& scorer, int d, int workers = 0);

/// Posterior entropy in units of ln bell(D): 0 for a degenerate table, 1 for
/// uniform. Exact mode only; a sampled table's truncated support would bias
/// the estimate, so it is refused.
double entropy_normalized(const PosteriorTable& table);

/// Probability that `block` appears as one of the partition's blocks.
double relevance(const PosteriorTable& table, const BlockKey& block);

/// Total probability of partitions satisfying a predicate.
double event_probability(const PosteriorTable& table,
                         const std::function<bool(const Partition&)>& predicate);

/// Predicate: all elements of `subset` share one block (regardless of what
/// else that block contains).
std::function<bool(const Partition&)> same_block(BlockKey subset);

/// Predicate: the partition has exactly k blocks.
std::function<bool(const Partition&)> has_block_count(int k);

/// Predicate: the partition attains the table's maximum probability
/// (ties included, so the event mass can exceed the single MAP atom).
std::function<bool(const Partition&)> is_map(const PosteriorTable& table);

/// How the posterior sees a known ground truth.
struct TruthSummary {
    double p_true = 0;      // posterior probability of the true partition
    std::size_t rank = 0;   // 1-based position by decreasing probability
    double ratio_to_map = 0; // p_true / max probability, in (0, 1]
    double entropy = 0;     // normalized entropy of the table
};

TruthSummary summarize_truth(const PosteriorTable& table, const Partition& truth);

} // namespace partmi
