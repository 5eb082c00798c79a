#include "partmi/combinatorics.hpp"
#include "partmi/errors.hpp"
#include "partmi/synth.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>

using namespace partmi;

TEST_SUITE_BEGIN("synth");

TEST_CASE("random partitions with a fixed block count") {
    Rng rng(41);
    SUBCASE("boundary cases are forced") {
        for (int i = 0; i < 20; ++i) {
            CHECK(random_partition_with_k(5, 1, rng) == Partition::one_block(5));
            CHECK(random_partition_with_k(5, 5, rng) == Partition::singletons(5));
        }
        CHECK(random_partition_with_k(1, 1, rng) == Partition::one_block(1));
        CHECK_THROWS_AS(random_partition_with_k(4, 0, rng), InputError);
        CHECK_THROWS_AS(random_partition_with_k(4, 5, rng), InputError);
    }
    SUBCASE("uniform over the 7 two-block partitions of 4 elements") {
        std::map<Partition, long> counts;
        const long draws = 100000;
        for (long i = 0; i < draws; ++i) {
            const auto p = random_partition_with_k(4, 2, rng);
            REQUIRE(p.block_count() == 2);
            ++counts[p];
        }
        REQUIRE(counts.size() == 7); // stirling2(4,2)
        std::vector<long> observed;
        for (const auto& [p, c] : counts) observed.push_back(c);
        const std::vector<double> expected(7, double(draws) / 7.0);
        CHECK(testsup::chi_square_stat(observed, expected) < testsup::chi_square_crit_001(6));
    }
    SUBCASE("block counts are exact for larger spaces") {
        for (int i = 0; i < 50; ++i) {
            CHECK(random_partition_with_k(12, 4, rng).block_count() == 4);
            CHECK(random_partition_with_k(40, 11, rng).block_count() == 11);
        }
    }
}

TEST_CASE("random block correlation matrices") {
    Rng rng(42);
    SUBCASE("size one is the scalar 1") {
        CHECK(random_block_correlation(1, rng) == Eigen::MatrixXd::Ones(1, 1));
    }
    SUBCASE("unit diagonal and positive definite") {
        for (int size : {2, 3, 5, 8}) {
            for (int i = 0; i < 25; ++i) {
                const auto r = random_block_correlation(size, rng);
                for (int d = 0; d < size; ++d) CHECK(r(d, d) == doctest::Approx(1.0));
                CHECK(r.isApprox(r.transpose(), 1e-14));
                CHECK(Eigen::LLT<Eigen::MatrixXd>(r).info() == Eigen::Success);
            }
        }
    }
    SUBCASE("pairwise correlation is marginally uniform on (-1, 1)") {
        std::vector<double> sample;
        sample.reserve(100000);
        for (int i = 0; i < 100000; ++i)
            sample.push_back(random_block_correlation(2, rng)(0, 1));
        CHECK(testsup::ks_uniformity_ok(std::move(sample),
                                        [](double r) { return 0.5 * (r + 1.0); }));
    }
}

TEST_CASE("generate") {
    SUBCASE("returns the partition used to assemble the columns") {
        SynthSpec spec;
        spec.d = 6;
        spec.truth = parse_partition("14|25|36");
        spec.n = 10;
        spec.seed = 1;
        const auto r = generate(spec);
        CHECK(r.truth == *spec.truth);
        CHECK(r.data.rows() == 10);
        CHECK(r.data.cols() == 6);
        CHECK(r.block_sigmas.size() == 3);
    }
    SUBCASE("deterministic given the seed") {
        SynthSpec spec;
        spec.d = 4;
        spec.k = 2;
        spec.n = 50;
        spec.seed = 77;
        const auto a = generate(spec);
        const auto b = generate(spec);
        CHECK(a.truth == b.truth);
        CHECK(a.data == b.data);
        spec.seed = 78;
        CHECK(generate(spec).data != a.data);
    }
    SUBCASE("cross-block correlations vanish for large samples") {
        SynthSpec spec;
        spec.d = 6;
        spec.truth = parse_partition("123|45|6");
        spec.n = 100000;
        spec.seed = 9;
        const auto r = generate(spec);
        Eigen::MatrixXd centered = r.data;
        centered.rowwise() -= r.data.colwise().mean();
        const Eigen::MatrixXd s = centered.transpose() * centered;
        for (int i = 0; i < 6; ++i)
            for (int j = i + 1; j < 6; ++j) {
                if (r.truth.label_of(i) == r.truth.label_of(j)) continue;
                const double corr = s(i, j) / std::sqrt(s(i, i) * s(j, j));
                CHECK(std::abs(corr) < 0.02);
            }
    }
    SUBCASE("all-singletons truth leaves every pair near-independent") {
        SynthSpec spec;
        spec.d = 4;
        spec.k = 4;
        spec.n = 100000;
        spec.seed = 10;
        const auto r = generate(spec);
        CHECK(r.truth == Partition::singletons(4));
        Eigen::MatrixXd centered = r.data;
        centered.rowwise() -= r.data.colwise().mean();
        const Eigen::MatrixXd s = centered.transpose() * centered;
        const double bound = 4.0 / std::sqrt(double(spec.n));
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                CHECK(std::abs(s(i, j) / std::sqrt(s(i, i) * s(j, j))) < bound);
    }
    SUBCASE("student tails are heavier than gaussian tails") {
        const auto sample_kurtosis = [](const Eigen::VectorXd& x) {
            const double mean = x.mean();
            double m2 = 0.0, m4 = 0.0;
            for (int i = 0; i < x.size(); ++i) {
                const double d = x(i) - mean;
                m2 += d * d;
                m4 += d * d * d * d;
            }
            m2 /= double(x.size());
            m4 /= double(x.size());
            return m4 / (m2 * m2);
        };
        std::vector<double> gauss_kurt, student_kurt;
        for (int rep = 0; rep < 11; ++rep) {
            SynthSpec spec;
            spec.d = 2;
            spec.k = 1;
            spec.n = 4000;
            spec.seed = 100 + std::uint64_t(rep);
            spec.family = Family::gaussian;
            gauss_kurt.push_back(sample_kurtosis(generate(spec).data.col(0)));
            spec.family = Family::student;
            spec.student_dof = 1.0;
            student_kurt.push_back(sample_kurtosis(generate(spec).data.col(0)));
        }
        std::sort(gauss_kurt.begin(), gauss_kurt.end());
        std::sort(student_kurt.begin(), student_kurt.end());
        CHECK(student_kurt[5] > 5.0 * gauss_kurt[5]); // medians
    }
    SUBCASE("multinomial tables have the right shape and total") {
        SynthSpec spec;
        spec.d = 3;
        spec.k = 2;
        spec.n = 500;
        spec.family = Family::multinomial;
        spec.arities = {2, 3, 2};
        spec.seed = 11;
        const auto r = generate(spec);
        REQUIRE(r.table.has_value());
        CHECK(r.table->n == 500);
        CHECK(r.table->arities == spec.arities);
        CHECK(r.table->counts.size() == 12);
        const auto again = generate(spec);
        CHECK(again.table->counts == r.table->counts);
    }
    SUBCASE("specs are validated") {
        SynthSpec spec;
        spec.d = 0;
        CHECK_THROWS_AS(generate(spec), InputError);
        spec = SynthSpec();
        spec.k = 9;
        spec.d = 3;
        CHECK_THROWS_AS(generate(spec), InputError);
        spec = SynthSpec();
        spec.family = Family::multinomial; // arities missing
        CHECK_THROWS_AS(generate(spec), InputError);
        spec = SynthSpec();
        spec.family = Family::student;
        spec.student_dof = 0.0;
        CHECK_THROWS_AS(generate(spec), InputError);
    }
}

TEST_SUITE_END();
