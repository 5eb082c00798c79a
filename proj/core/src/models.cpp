#include "partmi/models.hpp"

#include "partmi/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace partmi {

namespace {

// log-determinant of a symmetric positive definite matrix via Cholesky;
// throws so callers (samplers) can reject the move instead of seeing -inf
double spd_log_det(const Eigen::MatrixXd& m, const BlockKey& block, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(what) + " is not positive definite", block.str());
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    const int k = int(idx.size());
    Eigen::MatrixXd out(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) out(i, j) = m(idx[std::size_t(i)], idx[std::size_t(j)]);
    return out;
}

void check_block(const BlockKey& block, int d) {
    if (block.elements().back() >= d)
        throw InputError("block " + block.str() + " exceeds dimension " + std::to_string(d));
}

} // namespace

// ---------------------------------------------------------------------------
// Gaussian
// ---------------------------------------------------------------------------

GaussianSuffStats::GaussianSuffStats(Eigen::MatrixXd s_in, double n_eff_in, bool is_corr)
    : s(std::move(s_in)), n_eff(n_eff_in), is_correlation(is_corr) {
    if (s.rows() != s.cols() || s.rows() < 1)
        throw InputError("sum-of-squares matrix must be square and non-empty");
    if (!s.isApprox(s.transpose(), 1e-12))
        throw InputError("sum-of-squares matrix must be symmetric");
    if (!(n_eff >= 1.0)) throw InputError("effective degrees of freedom must be >= 1");
    if (is_correlation) {
        for (int d = 0; d < s.rows(); ++d)
            if (std::abs(s(d, d) / n_eff - 1.0) > 1e-9)
                throw InputError("correlation input: diagonal of S/n_eff must be 1");
    }
}

GaussianSuffStats GaussianSuffStats::from_data(const Eigen::MatrixXd& rows, bool known_mean) {
    const auto n = rows.rows();
    if (n < 1) throw InputError("need at least one observation");
    Eigen::MatrixXd centered = rows;
    double n_eff = double(n);
    if (!known_mean) {
        centered.rowwise() -= rows.colwise().mean();
        n_eff = double(n) - 1.0;
        if (n_eff < 1.0) throw InputError("need at least two observations with unknown mean");
    }
    return GaussianSuffStats(centered.transpose() * centered, n_eff);
}

GaussianSuffStats GaussianSuffStats::from_matrix(const Eigen::MatrixXd& matrix, double n,
                                                 bool known_mean, bool is_correlation) {
    const double n_eff = known_mean ? n : n - 1.0;
    if (!(n_eff >= 1.0)) throw InputError("sample count too small");
    return GaussianSuffStats(n_eff * matrix, n_eff, is_correlation);
}

GaussianSuffStats GaussianSuffStats::to_correlation() const {
    const int d = dim();
    Eigen::MatrixXd r(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            r(i, j) = i == j ? 1.0 : s(i, j) / std::sqrt(s(i, i) * s(j, j));
    return GaussianSuffStats(n_eff * r, n_eff, true);
}

GaussianHyper GaussianHyper::bayes_corr(int d) {
    return GaussianHyper{double(d) + 1.0, Eigen::VectorXd::Ones(d)};
}

double log_Z(int d, double n) {
    if (d < 1) throw InputError("log_Z: dimension must be >= 1");
    if (!(n + 1.0 - double(d) > 0.0))
        throw NumericalError("log_Z: gamma argument not positive (d=" + std::to_string(d) +
                             ", n=" + std::to_string(n) + ")");
    double acc = 0.5 * n * d * std::numbers::ln2 +
                 0.25 * d * (d - 1) * std::log(std::numbers::pi);
    for (int i = 1; i <= d; ++i) acc += std::lgamma(0.5 * (n + 1.0 - double(i)));
    return acc;
}

double gaussian_block_logml(const GaussianSuffStats& stats, const GaussianHyper& hyper,
                            const BlockKey& block) {
    const int d = stats.dim();
    check_block(block, d);
    if (stats.n_eff < double(d))
        throw NumericalError("marginal likelihood requires n_eff >= D (n_eff=" +
                             std::to_string(stats.n_eff) + ", D=" + std::to_string(d) + ")");
    if (hyper.lambda_diag.size() != d)
        throw InputError("lambda diagonal has wrong length");

    const auto& idx = block.elements();
    const int dk = block.size();
    const double nu_k = hyper.nu - double(d) + double(dk);

    double log_det_lambda = 0.0;
    for (int e : idx) {
        const double l = hyper.lambda_diag(e);
        if (!(l > 0.0)) throw InputError("lambda diagonal must be strictly positive");
        log_det_lambda += std::log(l);
    }

    Eigen::MatrixXd m = submatrix(stats.s, idx);
    for (int i = 0; i < dk; ++i) m(i, i) += hyper.lambda_diag(idx[std::size_t(i)]);
    const double log_det_posterior = spd_log_det(m, block, "Lambda_k + S_k");

    return log_Z(dk, stats.n_eff + nu_k) - log_Z(dk, nu_k) +
           0.5 * nu_k * log_det_lambda - 0.5 * (stats.n_eff + nu_k) * log_det_posterior;
}

double gaussian_bic_block(const GaussianSuffStats& stats, const BlockKey& block) {
    check_block(block, stats.dim());
    const auto& idx = block.elements();
    const int dk = block.size();
    const Eigen::MatrixXd sigma_hat = submatrix(stats.s, idx) / stats.n_eff;
    const double log_det = spd_log_det(sigma_hat, block, "block sample covariance");
    return -0.5 * stats.n_eff * log_det -
           0.25 * double(dk) * double(dk + 1) * std::log(stats.n_eff);
}

double gaussian_bic_score(const GaussianSuffStats& stats, const Partition& p) {
    double acc = 0.0;
    for (const auto& block : block_keys(p)) acc += gaussian_bic_block(stats, block);
    return acc;
}

GaussianHyper optimize_lambda(const GaussianSuffStats& stats) {
    const int d = stats.dim();
    if (stats.n_eff < double(d))
        throw NumericalError("optimize_lambda requires n_eff >= D");
    GaussianHyper hyper{double(d), Eigen::VectorXd(d)};
    const double nu_d = 1.0; // nu - D + 1 at the boundary nu = D

    for (int i = 0; i < d; ++i) {
        const double s_dd = stats.s(i, i);
        if (!(s_dd > 0.0))
            throw NumericalError("optimize_lambda: non-positive variance",
                                 BlockKey({i}).str());
        const auto objective = [&](double lambda) {
            return 0.5 * nu_d * std::log(lambda) -
                   0.5 * (stats.n_eff + nu_d) * std::log(lambda + s_dd);
        };
        double lambda = nu_d * s_dd / stats.n_eff; // stationary point
        // perturbation check; fall back to golden-section if it fails
        const double f0 = objective(lambda);
        if (!(f0 >= objective(lambda * (1.0 + 1e-4)) && f0 >= objective(lambda * (1.0 - 1e-4)))) {
            double lo = 1e-8 * s_dd / stats.n_eff, hi = 1e8 * s_dd / stats.n_eff;
            const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
            double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
            double fa = objective(a), fb = objective(b);
            for (int iter = 0; iter < 200 && hi - lo > 1e-12 * hi; ++iter) {
                if (fa > fb) {
                    hi = b; b = a; fb = fa;
                    a = hi - inv_phi * (hi - lo); fa = objective(a);
                } else {
                    lo = a; a = b; fa = fb;
                    b = lo + inv_phi * (hi - lo); fb = objective(b);
                }
            }
            lambda = 0.5 * (lo + hi);
        }
        hyper.lambda_diag(i) = lambda;
    }
    return hyper;
}

// ---------------------------------------------------------------------------
// Multinomial
// ---------------------------------------------------------------------------

MultinomialSuffStats::MultinomialSuffStats(std::vector<int> arities_in,
                                           std::vector<std::int64_t> counts_in)
    : arities(std::move(arities_in)), counts(std::move(counts_in)) {
    if (arities.empty()) throw InputError("contingency table: no variables");
    std::size_t cells = 1;
    for (int a : arities) {
        if (a < 2) throw InputError("contingency table: every variable needs >= 2 categories");
        cells *= std::size_t(a);
        if (cells > (std::size_t(1) << 31))
            throw ResourceError("contingency table too large to hold densely");
    }
    if (counts.size() != cells)
        throw InputError("contingency table has " + std::to_string(counts.size()) +
                         " cells, expected " + std::to_string(cells));
    n = 0;
    for (std::int64_t c : counts) {
        if (c < 0) throw InputError("contingency table: negative count");
        n += c;
    }
}

std::int64_t MultinomialSuffStats::cell(std::span<const int> coords) const {
    if (int(coords.size()) != dim()) throw InputError("cell: coordinate count mismatch");
    std::size_t idx = 0;
    for (int d = 0; d < dim(); ++d) {
        if (coords[std::size_t(d)] < 0 || coords[std::size_t(d)] >= arities[std::size_t(d)])
            throw InputError("cell: coordinate out of range");
        idx = idx * std::size_t(arities[std::size_t(d)]) + std::size_t(coords[std::size_t(d)]);
    }
    return counts[idx];
}

MultinomialSuffStats MultinomialSuffStats::from_rows(const std::vector<std::vector<int>>& rows,
                                                     std::vector<int> arities) {
    std::size_t cells = 1;
    for (int a : arities) cells *= std::size_t(a);
    std::vector<std::int64_t> counts(cells, 0);
    for (const auto& row : rows) {
        if (row.size() != arities.size()) throw InputError("observation has wrong width");
        std::size_t idx = 0;
        for (std::size_t d = 0; d < arities.size(); ++d) {
            if (row[d] < 0 || row[d] >= arities[d])
                throw InputError("observation category out of range");
            idx = idx * std::size_t(arities[d]) + std::size_t(row[d]);
        }
        ++counts[idx];
    }
    return MultinomialSuffStats(std::move(arities), std::move(counts));
}

std::vector<std::int64_t> marginal_counts(const MultinomialSuffStats& stats,
                                          const BlockKey& block) {
    const int d = stats.dim();
    check_block(block, d);
    const auto& members = block.elements();

    std::size_t block_cells = 1;
    for (int e : members) block_cells *= std::size_t(stats.arities[std::size_t(e)]);
    std::vector<std::int64_t> out(block_cells, 0);

    // walk the full table once, projecting each cell onto the block coords
    std::vector<int> coord(std::size_t(d), 0);
    for (std::size_t idx = 0; idx < stats.counts.size(); ++idx) {
        if (stats.counts[idx] != 0) {
            std::size_t sub = 0;
            for (int e : members)
                sub = sub * std::size_t(stats.arities[std::size_t(e)]) +
                      std::size_t(coord[std::size_t(e)]);
            out[sub] += stats.counts[idx];
        }
        for (int e = d - 1; e >= 0; --e) {
            if (++coord[std::size_t(e)] < stats.arities[std::size_t(e)]) break;
            coord[std::size_t(e)] = 0;
        }
    }
    return out;
}

double multinomial_block_logml(const MultinomialSuffStats& stats, const DirichletHyper& hyper,
                               const BlockKey& block) {
    if (!(hyper.concentration > 0.0))
        throw InputError("Dirichlet concentration must be strictly positive");
    const auto marg = marginal_counts(stats, block);
    const double a = hyper.concentration;
    const double a_total = a * double(marg.size());

    double acc = std::lgamma(a_total) - double(marg.size()) * std::lgamma(a) -
                 std::lgamma(double(stats.n) + a_total);
    for (std::int64_t c : marg) acc += std::lgamma(double(c) + a);
    return acc;
}

double multinomial_bic_block(const MultinomialSuffStats& stats, const BlockKey& block) {
    if (stats.n < 1) throw InputError("BIC needs at least one observation");
    const auto marg = marginal_counts(stats, block);
    const double n = double(stats.n);
    double entropy = 0.0;
    for (std::int64_t c : marg)
        if (c > 0) {
            const double f = double(c) / n;
            entropy -= f * std::log(f);
        }
    return -n * entropy - 0.5 * (double(marg.size()) - 1.0) * std::log(n);
}

double multinomial_bic_score(const MultinomialSuffStats& stats, const Partition& p) {
    double acc = 0.0;
    for (const auto& block : block_keys(p)) acc += multinomial_bic_block(stats, block);
    return acc;
}

// ---------------------------------------------------------------------------
// Scorers
// ---------------------------------------------------------------------------

double ModelScorer::log_score(const Partition& p) const {
    if (p.size() != dim())
        throw InputError("score: partition of " + std::to_string(p.size()) +
                         " elements against a " + std::to_string(dim()) + "-dimensional model");
    double acc = log_prior(p);
    for (const auto& block : block_keys(p)) acc += block_log_score(block);
    return acc;
}

GaussianMarginalScorer::GaussianMarginalScorer(GaussianSuffStats stats, GaussianHyper hyper)
    : stats_(std::move(stats)), hyper_(std::move(hyper)) {
    if (hyper_.lambda_diag.size() != stats_.dim())
        throw InputError("hyperparameter dimension mismatch");
    if (hyper_.nu < double(stats_.dim()))
        throw InputError("prior degrees of freedom must be at least D");
}

double GaussianMarginalScorer::block_log_score(const BlockKey& block) const {
    return gaussian_block_logml(stats_, hyper_, block);
}

GaussianBicScorer::GaussianBicScorer(GaussianSuffStats stats) : stats_(std::move(stats)) {}

double GaussianBicScorer::block_log_score(const BlockKey& block) const {
    return gaussian_bic_block(stats_, block);
}

MultinomialMarginalScorer::MultinomialMarginalScorer(MultinomialSuffStats stats,
                                                     DirichletHyper hyper)
    : stats_(std::move(stats)), hyper_(hyper) {
    if (!(hyper_.concentration > 0.0))
        throw InputError("Dirichlet concentration must be strictly positive");
}

double MultinomialMarginalScorer::block_log_score(const BlockKey& block) const {
    return multinomial_block_logml(stats_, hyper_, block);
}

MultinomialBicScorer::MultinomialBicScorer(MultinomialSuffStats stats)
    : stats_(std::move(stats)) {}

double MultinomialBicScorer::block_log_score(const BlockKey& block) const {
    return multinomial_bic_block(stats_, block);
}

} // namespace partmi
