#pragma once

#include <span>

namespace robophoto::stats {

/// Regularized incomplete beta I_x(a, b), by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with df degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_one_sided = 0.5;  // H1: mean(a) > mean(b)
    double mean_a = 0.0;
    double mean_b = 0.0;
};

/// Welch's unequal-variance t statistic with a one-sided p-value. Each sample
/// needs at least 2 finite values. Zero variance in both samples with equal
/// means is undefined and throws NumericError.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace robophoto::stats
