#include "partmi/synth.hpp"

#include "partmi/combinatorics.hpp"
#include "partmi/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace partmi {

void SynthSpec::validate() const {
    if (d < 1) throw InputError("synth: dimension must be >= 1");
    if (truth) {
        if (truth->size() != d) throw InputError("synth: truth partition has wrong dimension");
    } else if (k < 1 || k > d) {
        throw InputError("synth: block count must be in 1..D");
    }
    if (n < 1) throw InputError("synth: need at least one observation");
    if (family == Family::student && !(student_dof > 0.0))
        throw InputError("synth: Student degrees of freedom must be positive");
    if (family == Family::multinomial) {
        if (int(arities.size()) != d) throw InputError("synth: arities must have length D");
        for (int a : arities)
            if (a < 2) throw InputError("synth: every arity must be >= 2");
    }
}

Partition random_partition_with_k(int d, int k, Rng& rng) {
    if (k < 1 || k > d) throw InputError("random_partition_with_k: need 1 <= K <= D");

    // log-domain Stirling table; rows up to d
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> ls(std::size_t(d) + 1);
    ls[0] = {0.0};
    for (int a = 1; a <= d; ++a) {
        auto& row = ls[std::size_t(a)];
        row.assign(std::size_t(a) + 1, neg_inf);
        const auto& prev = ls[std::size_t(a - 1)];
        for (int b = 1; b <= a; ++b) {
            const double from_join = b <= a - 1 ? std::log(double(b)) + prev[std::size_t(b)] : neg_inf;
            const double from_new = prev[std::size_t(b - 1)];
            if (from_join == neg_inf) row[std::size_t(b)] = from_new;
            else if (from_new == neg_inf) row[std::size_t(b)] = from_join;
            else {
                const double hi = std::max(from_join, from_new);
                row[std::size_t(b)] = hi + std::log1p(std::exp(std::min(from_join, from_new) - hi));
            }
        }
    }

    // walk down: element a joins an existing block of a (a-1, b)-partition
    // with probability b * S(a-1, b) / S(a, b), else starts a new block
    std::vector<bool> starts_new(std::size_t(d) + 1, false);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int b = k;
    for (int a = d; a >= 1; --a) {
        if (b == a) {
            starts_new[std::size_t(a)] = true; // forced: all singletons from here down
            --b;
        } else if (b == 1) {
            starts_new[std::size_t(a)] = (a == 1);
            if (a == 1) --b;
        } else {
            const double log_p_join = std::log(double(b)) + ls[std::size_t(a - 1)][std::size_t(b)] -
                                      ls[std::size_t(a)][std::size_t(b)];
            if (unif(rng) < std::exp(log_p_join)) {
                starts_new[std::size_t(a)] = false;
            } else {
                starts_new[std::size_t(a)] = true;
                --b;
            }
        }
    }

    // walk up: realize the labels; joins choose uniformly among open blocks
    std::vector<int> labels(static_cast<std::size_t>(d));
    int open = 0;
    for (int a = 1; a <= d; ++a) {
        if (starts_new[std::size_t(a)]) {
            labels[std::size_t(a - 1)] = open++;
        } else {
            std::uniform_int_distribution<int> pick(0, open - 1);
            labels[std::size_t(a - 1)] = pick(rng);
        }
    }
    return Partition::canonicalize(labels);
}

Eigen::MatrixXd random_block_correlation(int size, Rng& rng) {
    if (size < 1) throw InputError("random_block_correlation: size must be >= 1");
    if (size == 1) return Eigen::MatrixXd::Ones(1, 1);

    std::normal_distribution<double> normal(0.0, 1.0);
    const double dof = double(size) + 1.0; // Wishart degrees of freedom

    for (int attempt = 0; attempt < 100; ++attempt) {
        // Bartlett: W = A A^t with A lower triangular, chi-square diagonal
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
        for (int i = 0; i < size; ++i) {
            std::chi_squared_distribution<double> chi2(dof - double(i));
            a(i, i) = std::sqrt(chi2(rng));
            for (int j = 0; j < i; ++j) a(i, j) = normal(rng);
        }
        const Eigen::MatrixXd w = a * a.transpose();
        Eigen::MatrixXd r(size, size);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j)
                r(i, j) = i == j ? 1.0 : w(i, j) / std::sqrt(w(i, i) * w(j, j));
        if (!r.allFinite()) continue;
        if (Eigen::LLT<Eigen::MatrixXd>(r).info() == Eigen::Success) return r;
    }
    throw NumericalError("random_block_correlation: could not draw a positive definite matrix");
}

SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0x73796e7468ULL)); // stream tag

    SynthResult out;
    out.truth = spec.truth ? *spec.truth : random_partition_with_k(spec.d, spec.k, rng);
    const auto blocks = out.truth.blocks();

    if (spec.family == Family::multinomial) {
        std::vector<std::vector<int>> rows(std::size_t(spec.n), std::vector<int>(std::size_t(spec.d)));
        for (const auto& block : blocks) {
            std::size_t cells = 1;
            for (int e : block) cells *= std::size_t(spec.arities[std::size_t(e)]);
            // flat Dirichlet over the block's joint cells
            std::gamma_distribution<double> gamma(1.0, 1.0);
            std::vector<double> theta(cells);
            double total = 0.0;
            for (auto& t : theta) total += (t = gamma(rng));
            std::vector<double> cdf(cells);
            double acc = 0.0;
            for (std::size_t i = 0; i < cells; ++i) cdf[i] = (acc += theta[i] / total);
            cdf.back() = 1.0;

            std::uniform_real_distribution<double> unif(0.0, 1.0);
            for (long obs = 0; obs < spec.n; ++obs) {
                const auto it = std::lower_bound(cdf.begin(), cdf.end(), unif(rng));
                std::size_t cell = std::size_t(it - cdf.begin());
                // unpack the joint cell into per-variable categories
                for (auto e_it = block.rbegin(); e_it != block.rend(); ++e_it) {
                    const std::size_t arity = std::size_t(spec.arities[std::size_t(*e_it)]);
                    rows[std::size_t(obs)][std::size_t(*e_it)] = int(cell % arity);
                    cell /= arity;
                }
            }
        }
        out.table = MultinomialSuffStats::from_rows(rows, spec.arities);
        return out;
    }

    out.data.resize(spec.n, spec.d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& block : blocks) {
        const int size = int(block.size());
        Eigen::MatrixXd sigma = random_block_correlation(size, rng);
        const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
        out.block_sigmas.push_back(std::move(sigma));

        std::chi_squared_distribution<double> chi2(spec.student_dof);
        Eigen::VectorXd z(size);
        for (long obs = 0; obs < spec.n; ++obs) {
            for (int i = 0; i < size; ++i) z(i) = normal(rng);
            Eigen::VectorXd x = chol * z;
            if (spec.family == Family::student) {
                // scale mixture: one chi-square per observation per block
                x /= std::sqrt(chi2(rng) / spec.student_dof);
            }
            for (int i = 0; i < size; ++i) out.data(obs, block[std::size_t(i)]) = x(i);
        }
    }
    return out;
}

} // namespace partmi
