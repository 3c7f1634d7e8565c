#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "robophoto/errors.hpp"
#include "robophoto/rng.hpp"
#include "robophoto/stats.hpp"

using namespace robophoto;

TEST_SUITE("stats") {

TEST_CASE("t distribution symmetry") {
    for (double df : {1.0, 2.5, 10.0, 100.0}) {
        CHECK(stats::student_t_cdf(0.0, df) == doctest::Approx(0.5));
        CHECK(stats::student_t_cdf(1.3, df) + stats::student_t_cdf(-1.3, df) == doctest::Approx(1.0));
    }
    // Cauchy closed form at df = 1.
    CHECK(stats::student_t_cdf(1.0, 1.0) == doctest::Approx(0.75));
}

TEST_CASE("welch against an integration oracle") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> a, b;
        const std::size_t na = 5 + rng.below(30), nb = 5 + rng.below(30);
        for (std::size_t i = 0; i < na; ++i) a.push_back(rng.normal() * 1.5 + 0.4);
        for (std::size_t i = 0; i < nb; ++i) b.push_back(rng.normal());
        const auto r = stats::welch_t_test(a, b);
        const auto [t, df] = oracle::welch_statistic(a, b);
        CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
        CHECK(r.df == doctest::Approx(df).epsilon(1e-12));
        CHECK(r.p_one_sided == doctest::Approx(oracle::t_upper_tail(t, df)).epsilon(1e-6));
    }
}

TEST_CASE("clear separation gives a tiny p value") {
    Rng rng(5);
    std::vector<double> a, b;
    for (int i = 0; i < 1000; ++i) {
        a.push_back(1.0 + 0.5 * rng.normal());
        b.push_back(0.5 * rng.normal());
    }
    CHECK(stats::welch_t_test(a, b).p_one_sided < 1e-10);
}

TEST_CASE("identical samples") {
    const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    const auto r = stats::welch_t_test(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p_one_sided == doctest::Approx(0.5));
}

TEST_CASE("degenerate input") {
    const std::vector<double> one = {1.0};
    const std::vector<double> flat = {2.0, 2.0, 2.0};
    CHECK_THROWS_AS(stats::welch_t_test(one, flat), Error);
    CHECK_THROWS_AS(stats::welch_t_test(flat, flat), NumericError);
    const std::vector<double> with_nan = {1.0, std::nan("")};
    CHECK_THROWS_AS(stats::welch_t_test(with_nan, flat), Error);
}

}
