#include "partmi/errors.hpp"
#include "partmi/exact.hpp"
#include "partmi/io.hpp"

#include <doctest.h>

#include <sstream>

using namespace partmi;

TEST_SUITE_BEGIN("io");

TEST_CASE("numeric CSV parsing") {
    SUBCASE("plain matrix") {
        std::istringstream in("1,2.5,3\n4,-5e-2,6\n");
        const auto m = read_csv_matrix(in);
        CHECK(m.rows() == 2);
        CHECK(m.cols() == 3);
        CHECK(m(0, 1) == 2.5);
        CHECK(m(1, 1) == -0.05);
    }
    SUBCASE("header, comments and blank lines are tolerated") {
        std::istringstream in("# covariance\nx1,x2\n\n1,0.5\n0.5,1\n");
        const auto m = read_csv_matrix(in);
        CHECK(m.rows() == 2);
        CHECK(m(0, 1) == 0.5);
    }
    SUBCASE("ragged and non-numeric data are rejected") {
        std::istringstream ragged("1,2\n3\n");
        CHECK_THROWS_AS(read_csv_matrix(ragged), InputError);
        std::istringstream words("1,2\n3,abc\n");
        CHECK_THROWS_AS(read_csv_matrix(words), InputError);
        std::istringstream empty("# nothing\n");
        CHECK_THROWS_AS(read_csv_matrix(empty), InputError);
    }
}

TEST_CASE("contingency CSV round-trip") {
    const MultinomialSuffStats stats({2, 3}, {5, 0, 2, 1, 0, 9});
    std::ostringstream out;
    write_contingency_csv(out, stats);
    std::istringstream in(out.str());
    const auto back = read_contingency_csv(in);
    CHECK(back.arities == stats.arities);
    CHECK(back.counts == stats.counts);
    CHECK(back.n == 17);

    SUBCASE("header and bounds are enforced") {
        std::istringstream missing("0,0,5\n");
        CHECK_THROWS_AS(read_contingency_csv(missing), InputError);
        std::istringstream bad_coord("arities,2,2\n0,2,5\n");
        CHECK_THROWS_AS(read_contingency_csv(bad_coord), InputError);
        std::istringstream bad_count("arities,2,2\n0,0,-1\n");
        CHECK_THROWS_AS(read_contingency_csv(bad_count), InputError);
    }
}

TEST_CASE("probability formatting") {
    CHECK(format_probability(0.912) == "0.912");
    CHECK(format_probability(0.0194) == "0.0194");
    CHECK(format_probability(0.00477) == "0.00477");
    CHECK(format_probability(0.000320145) == "3.20145e-04"); // scientific below 1e-3
    CHECK(format_probability(0.0) == "0");
    CHECK(format_probability(1.0) == "1");
}

TEST_CASE("posterior export") {
    PosteriorTable t;
    t.d = 3;
    t.mode = PosteriorMode::exact;
    t.partitions = enumerate_partitions(3); // 123, 12|3, 13|2, 1|23, 1|2|3
    t.probs = {0.5, 0.1, 0.15, 0.2, 0.05};

    SUBCASE("CSV is sorted by decreasing probability") {
        std::ostringstream out;
        write_posterior_csv(out, t);
        CHECK(out.str() == "partition,probability\n"
                           "123,0.5\n"
                           "1|23,0.2\n"
                           "13|2,0.15\n"
                           "12|3,0.1\n"
                           "1|2|3,0.05\n");
    }
    SUBCASE("JSON carries entropy, MAP and queries") {
        const auto doc = posterior_json(t, {BlockKey({0, 1})}, {BlockKey({0, 2})});
        CHECK(doc.find("\"map\": \"123\"") != std::string::npos);
        CHECK(doc.find("\"entropy_normalized\"") != std::string::npos);
        CHECK(doc.find("\"relevance\"") != std::string::npos);
        CHECK(doc.find("\"12\"") != std::string::npos);
        CHECK(doc.find("\"same_block\"") != std::string::npos);
        CHECK(doc.find("\"13\"") != std::string::npos);
    }
    SUBCASE("MAP tie-break is the lexicographically smaller RGS") {
        PosteriorTable tie = t;
        tie.probs = {0.3, 0.3, 0.15, 0.2, 0.05};
        CHECK(tie.partitions[tie.map_index()].str() == "123");
    }
}

TEST_CASE("embedded HIV summary statistics") {
    const auto& hiv = hiv_dataset();
    CHECK(hiv.n == 107);
    CHECK(hiv.known_mean == false);
    CHECK(hiv.correlation(1, 0) == 0.483);
    CHECK(hiv.correlation(0, 1) == 0.483); // mirrored
    CHECK(hiv.correlation(5, 1) == -0.314);
    CHECK(hiv.correlation(3, 3) == 1.0);
    CHECK(hiv.variances(2) == 8924231.9);
    CHECK(hiv.variances(5) == 1.378);
    CHECK(hiv.correlation.isApprox(hiv.correlation.transpose()));
}

TEST_CASE("model kind names") {
    for (const auto kind : {ModelKind::bayes_optim, ModelKind::bayes_corr, ModelKind::bic,
                            ModelKind::multinomial, ModelKind::multinomial_bic,
                            ModelKind::constant})
        CHECK(parse_model_kind(model_kind_name(kind)) == kind);
    CHECK_THROWS_AS(parse_model_kind("ridge"), InputError);
}

TEST_SUITE_END();
