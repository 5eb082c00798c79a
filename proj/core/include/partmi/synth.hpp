#pragma once

#include "partmi/models.hpp"
#include "partmi/partition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace partmi {

enum class Family { gaussian, student, multinomial };

/// Recipe for one synthetic dataset: a true partition (given or drawn
/// uniformly among those with K blocks), one correlation matrix per block,
/// N i.i.d. observations with mutually independent blocks.
struct SynthSpec {
    int d = 6;
    int k = 1;                          // true block count, ignored when truth is set
    std::optional<Partition> truth;
    long n = 300;
    Family family = Family::gaussian;
    double student_dof = 3.0;           // tail index for the Student-t family
    std::vector<int> arities;           // multinomial only
    std::uint64_t seed = 0;

    void validate() const;
};

/// Uniform draw over the stirling2(d, k) partitions with exactly k blocks,
/// by walking the Stirling recurrence backwards.
Partition random_partition_with_k(int d, int k, Rng& rng);

/// Correlation matrix of a Wishart(size+1, I) draw (Bartlett construction,
/// rescaled to unit diagonal). Pairwise entries are marginally uniform on
/// (-1, 1).
Eigen::MatrixXd random_block_correlation(int size, Rng& rng);

struct SynthResult {
    Eigen::MatrixXd data;                       // N x D, continuous families
    std::optional<MultinomialSuffStats> table;  // multinomial family
    Partition truth;
    std::vector<Eigen::MatrixXd> block_sigmas;  // per block, label order
};

/// Generate one dataset. Blocks are mutually independent by construction;
/// the continuous families share the same per-block correlation matrices.
SynthResult generate(const SynthSpec& spec);

} // namespace partmi
