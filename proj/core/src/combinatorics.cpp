#include "partmi/combinatorics.hpp"

#include "partmi/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace partmi {

namespace {

struct ExactTables {
    // stirling[a][b] = {a brace b}; bell[a] = sum_b stirling[a][b]
    std::array<std::array<uint128, kMaxExactCount + 1>, kMaxExactCount + 1> stirling{};
    std::array<uint128, kMaxExactCount + 1> bell{};

    ExactTables() {
        stirling[0][0] = 1;
        bell[0] = 1;
        for (int a = 1; a <= kMaxExactCount; ++a) {
            uint128 row_sum = 0;
            for (int b = 1; b <= a; ++b) {
                stirling[a][b] = uint128(b) * stirling[a - 1][b] + stirling[a - 1][b - 1];
                row_sum += stirling[a][b];
            }
            bell[a] = row_sum;
        }
    }
};

const ExactTables& tables() {
    static const ExactTables t;
    return t;
}

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// One forward pass of the log-domain Stirling recurrence, returning row a.
std::vector<double> log_stirling_row(int a) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> row(a + 1, neg_inf), prev;
    row[0] = 0.0; // {0 brace 0} = 1
    for (int n = 1; n <= a; ++n) {
        prev.assign(row.begin(), row.end());
        std::fill(row.begin(), row.end(), neg_inf);
        for (int b = 1; b <= n; ++b)
            row[b] = log_add(std::log(double(b)) + prev[b], prev[b - 1]);
    }
    return row;
}

} // namespace

uint128 bell(int d) {
    if (d < 0 || d > kMaxExactCount)
        throw InputError("bell: set size must be in 0..30, got " + std::to_string(d));
    return tables().bell[d];
}

uint128 stirling2(int a, int b) {
    if (a < 0 || a > kMaxExactCount || b < 0 || b > a)
        throw InputError("stirling2: need 0 <= b <= a <= 30, got a=" + std::to_string(a) +
                         " b=" + std::to_string(b));
    return tables().stirling[a][b];
}

double log_bell(int d) {
    if (d < 0) throw InputError("log_bell: negative set size");
    if (d <= kMaxExactCount) return std::log(double(bell(d)));
    const auto row = log_stirling_row(d);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    double acc = neg_inf;
    for (int b = 1; b <= d; ++b) acc = log_add(acc, row[b]);
    return acc;
}

double log_stirling2(int a, int b) {
    if (a < 0 || b < 0 || b > a)
        throw InputError("log_stirling2: need 0 <= b <= a");
    if (a == 0) return 0.0;
    if (b == 0) return -std::numeric_limits<double>::infinity();
    if (a <= kMaxExactCount) return std::log(double(stirling2(a, b)));
    return log_stirling_row(a)[b];
}

std::vector<double> block_count_prior(int d) {
    if (d < 1) throw InputError("block_count_prior: set size must be >= 1");
    std::vector<double> prior(d);
    if (d <= kMaxExactCount) {
        const double total = double(bell(d));
        for (int k = 1; k <= d; ++k) prior[k - 1] = double(stirling2(d, k)) / total;
    } else {
        const double lb = log_bell(d);
        const auto row = log_stirling_row(d);
        for (int k = 1; k <= d; ++k) prior[k - 1] = std::exp(row[k] - lb);
    }
    return prior;
}

std::string to_decimal_string(uint128 value) {
    if (value == 0) return "0";
    std::string digits;
    while (value > 0) {
        digits.push_back(char('0' + int(value % 10)));
        value /= 10;
    }
    std::reverse(digits.begin(), digits.end());
    return digits;
}

} // namespace partmi
