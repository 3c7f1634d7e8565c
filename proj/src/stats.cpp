#include "robophoto/stats.hpp"

#include <cmath>
#include <limits>

#include "robophoto/errors.hpp"

namespace robophoto::stats {

namespace {

// Continued fraction for I_x(a,b) (modified Lentz), valid for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw ArgumentError("incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw ArgumentError("degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);  // P(T > |t|)
    return t >= 0.0 ? 1.0 - tail : tail;
}

namespace {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double n = 0.0;
};

Moments moments(std::span<const double> xs) {
    Moments m;
    m.n = static_cast<double>(xs.size());
    for (double x : xs) {
        if (!std::isfinite(x)) throw ArgumentError("t-test samples must be finite");
        m.mean += x;
    }
    m.mean /= m.n;
    for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
    m.variance /= m.n - 1.0;
    return m;
}

}  // namespace

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw ArgumentError("each t-test sample needs at least 2 values");
    const Moments ma = moments(a), mb = moments(b);
    WelchResult r;
    r.mean_a = ma.mean;
    r.mean_b = mb.mean;
    const double va = ma.variance / ma.n, vb = mb.variance / mb.n;
    const double se2 = va + vb;
    const double diff = ma.mean - mb.mean;
    if (se2 == 0.0) {
        if (diff == 0.0) throw NumericError("t statistic undefined: both samples are constant and equal");
        r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.df = ma.n + mb.n - 2.0;
        r.p_one_sided = diff > 0 ? 0.0 : 1.0;
        return r;
    }
    r.t = diff / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    if (r.t == 0.0) {
        r.p_one_sided = 0.5;
    } else {
        const double tail = 0.5 * regularized_incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
        r.p_one_sided = r.t > 0 ? tail : 1.0 - tail;
    }
    return r;
}

}  // namespace robophoto::stats
