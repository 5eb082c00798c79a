#pragma once

#include "partmi/exact.hpp"
#include "partmi/models.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace partmi {

// All parsing and printing is locale-independent: '.' decimal point, ','
// field separator, no grouping.

/// Rectangular numeric CSV (rows = observations). Lines starting with '#'
/// and blank lines are skipped; a single leading non-numeric line is
/// treated as a header and skipped.
Eigen::MatrixXd read_csv_matrix(std::istream& in);
Eigen::MatrixXd read_csv_matrix_file(const std::string& path);

/// Contingency table CSV: a header line "arities,I_1,...,I_D", then one
/// line per non-empty cell "x_1,...,x_D,count" with 0-based coordinates.
MultinomialSuffStats read_contingency_csv(std::istream& in);
MultinomialSuffStats read_contingency_csv_file(const std::string& path);

void write_contingency_csv(std::ostream& out, const MultinomialSuffStats& stats);

/// 6 significant digits; scientific notation below 1e-3.
std::string format_probability(double p);

/// "partition,probability" rows sorted by decreasing probability.
void write_posterior_csv(std::ostream& out, const PosteriorTable& table);

/// JSON document with the sorted table plus entropy (exact mode only), the
/// MAP partition, and any requested relevance / same-block queries.
std::string posterior_json(const PosteriorTable& table,
                           const std::vector<BlockKey>& relevance_queries = {},
                           const std::vector<BlockKey>& same_block_queries = {});

/// Correlations of Roverato's HIV diagnosis study (6 blood measurements on
/// 107 children), the standard small benchmark for mutual independence
/// extraction. Lower triangle as published; variances on the diagonal.
struct HivDataset {
    Eigen::MatrixXd correlation; // 6x6 symmetric, unit diagonal
    Eigen::VectorXd variances;   // length 6
    int n = 107;
    bool known_mean = false;
};

const HivDataset& hiv_dataset();

/// Scorer variants exposed on the command line.
enum class ModelKind { bayes_optim, bayes_corr, bic, multinomial, multinomial_bic, constant };

ModelKind parse_model_kind(const std::string& name);
std::string model_kind_name(ModelKind kind);

} // namespace partmi
