#pragma once

#include "partmi/partition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace partmi {

// ---------------------------------------------------------------------------
// Gaussian model
// ---------------------------------------------------------------------------

/// Sufficient statistics of a multivariate normal sample: the sum-of-squares
/// matrix S = sum (x_n - mu)(x_n - mu)^t and its effective degrees of freedom
/// (N when the mean is known, N-1 when the sample mean was plugged in).
struct GaussianSuffStats {
    Eigen::MatrixXd s;
    double n_eff = 0;
    bool is_correlation = false;

    GaussianSuffStats(Eigen::MatrixXd s, double n_eff, bool is_correlation = false);

    int dim() const { return int(s.rows()); }

    /// From raw observations (rows). Subtracts the sample mean unless the
    /// mean is known to be zero, adjusting n_eff accordingly.
    static GaussianSuffStats from_data(const Eigen::MatrixXd& rows, bool known_mean);

    /// From a published covariance or correlation matrix with sample count n:
    /// S = n_eff * matrix.
    static GaussianSuffStats from_matrix(const Eigen::MatrixXd& matrix, double n,
                                         bool known_mean, bool is_correlation);

    /// Same sample expressed through its correlation matrix
    /// (S' = n_eff * R with R_ij = S_ij / sqrt(S_ii S_jj)).
    GaussianSuffStats to_correlation() const;
};

/// Inverse-Wishart hyperparameters: prior degrees of freedom and the
/// diagonal of the prior scale matrix.
struct GaussianHyper {
    double nu = 0;
    Eigen::VectorXd lambda_diag;

    /// nu = D+1 with identity scale; pairs with correlation-matrix input to
    /// put uniform marginals on the prior correlations.
    static GaussianHyper bayes_corr(int d);
};

/// ln Z(d, n) = (nd/2) ln 2 + (d(d-1)/4) ln pi + sum_{i=1..d} lnGamma((n+1-i)/2).
/// Requires n + 1 - d > 0.
double log_Z(int d, double n);

/// Log marginal likelihood contribution of one block under the conjugate
/// inverse-Wishart prior:
///   ln Z(D_k, n_eff + nu_k) - ln Z(D_k, nu_k)
///   + (nu_k/2) ln|Lambda_k| - ((n_eff + nu_k)/2) ln|Lambda_k + S_k|
/// with nu_k = nu - D + D_k. Throws NumericalError if Lambda_k + S_k is not
/// positive definite or n_eff < D.
double gaussian_block_logml(const GaussianSuffStats& stats, const GaussianHyper& hyper,
                            const BlockKey& block);

/// Per-block BIC term: -(n_eff/2) ln|S_k / n_eff| - (D_k(D_k+1)/4) ln n_eff.
double gaussian_bic_block(const GaussianSuffStats& stats, const BlockKey& block);

/// BIC score of a whole partition (sum of its block terms).
double gaussian_bic_score(const GaussianSuffStats& stats, const Partition& p);

/// Hyperparameters that maximize the marginal likelihood of the
/// all-singletons partition at the boundary nu = D. The objective separates
/// per coordinate with stationary point lambda_d = nu_d S_dd / n_eff
/// (nu_d = 1); a golden-section search backs up the closed form if the
/// local perturbation check fails.
GaussianHyper optimize_lambda(const GaussianSuffStats& stats);

// ---------------------------------------------------------------------------
// Cross-classified multinomial model
// ---------------------------------------------------------------------------

/// Dense contingency table over a product of finite supports. Cell (x_1,..,x_D)
/// lives at flat index (..(x_1 * I_2 + x_2) * I_3 + ..), last coordinate fastest.
struct MultinomialSuffStats {
    std::vector<int> arities;        // I_d >= 2
    std::vector<std::int64_t> counts; // prod(I_d) cells
    std::int64_t n = 0;

    MultinomialSuffStats(std::vector<int> arities, std::vector<std::int64_t> counts);

    int dim() const { return int(arities.size()); }
    std::int64_t cell(std::span<const int> coords) const;

    /// Tabulate observations given as rows of category indices (0-based).
    static MultinomialSuffStats from_rows(const std::vector<std::vector<int>>& rows,
                                          std::vector<int> arities);
};

/// Symmetric Dirichlet prior: the same concentration for every cell of every
/// block table.
struct DirichletHyper {
    double concentration = 1.0;
};

/// Counts of the block's marginal table (full table summed over the
/// coordinates outside the block), flat-indexed over the block's arities in
/// block element order.
std::vector<std::int64_t> marginal_counts(const MultinomialSuffStats& stats,
                                          const BlockKey& block);

/// Dirichlet-multinomial log marginal of one block:
/// lnGamma(sum a) - sum lnGamma(a) + sum lnGamma(N_x + a) - lnGamma(N + sum a).
double multinomial_block_logml(const MultinomialSuffStats& stats, const DirichletHyper& hyper,
                               const BlockKey& block);

/// Per-block BIC term: -N H(f_k) - ((I_Bk - 1)/2) ln N with f_k the block's
/// marginal frequencies and 0 ln 0 = 0.
double multinomial_bic_block(const MultinomialSuffStats& stats, const BlockKey& block);

double multinomial_bic_score(const MultinomialSuffStats& stats, const Partition& p);

// ---------------------------------------------------------------------------
// Scorer interface
// ---------------------------------------------------------------------------

/// Maps a partition to its unnormalized log posterior score ln phi(B), up to
/// an additive constant independent of B. Scores are additive over blocks;
/// a non-uniform partition prior can be layered on via log_prior().
/// Immutable after construction and safe for concurrent score calls.
class ModelScorer {
public:
    virtual ~ModelScorer() = default;

    virtual int dim() const = 0;
    virtual double block_log_score(const BlockKey& block) const = 0;

    /// Additive log prior ln Pr(B); the default (uniform over partitions)
    /// contributes a constant and is dropped.
    virtual double log_prior(const Partition&) const { return 0.0; }

    /// Sum of block scores plus the log prior.
    double log_score(const Partition& p) const;
};

class GaussianMarginalScorer final : public ModelScorer {
public:
    GaussianMarginalScorer(GaussianSuffStats stats, GaussianHyper hyper);

    int dim() const override { return stats_.dim(); }
    double block_log_score(const BlockKey& block) const override;

    const GaussianSuffStats& stats() const { return stats_; }
    const GaussianHyper& hyper() const { return hyper_; }

private:
    GaussianSuffStats stats_;
    GaussianHyper hyper_;
};

class GaussianBicScorer final : public ModelScorer {
public:
    explicit GaussianBicScorer(GaussianSuffStats stats);

    int dim() const override { return stats_.dim(); }
    double block_log_score(const BlockKey& block) const override;

private:
    GaussianSuffStats stats_;
};

class MultinomialMarginalScorer final : public ModelScorer {
public:
    MultinomialMarginalScorer(MultinomialSuffStats stats, DirichletHyper hyper);

    int dim() const override { return stats_.dim(); }
    double block_log_score(const BlockKey& block) const override;

private:
    MultinomialSuffStats stats_;
    DirichletHyper hyper_;
};

class MultinomialBicScorer final : public ModelScorer {
public:
    explicit MultinomialBicScorer(MultinomialSuffStats stats);

    int dim() const override { return stats_.dim(); }
    double block_log_score(const BlockKey& block) const override;

private:
    MultinomialSuffStats stats_;
};

/// Every partition scores the same; the posterior is uniform. Test mode.
class ConstantScorer final : public ModelScorer {
public:
    explicit ConstantScorer(int d) : d_(d) {}
    int dim() const override { return d_; }
    double block_log_score(const BlockKey&) const override { return 0.0; }

private:
    int d_;
};

} // namespace partmi
