#include "mdhp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "mdhp/common.hpp"

namespace mdhp::stats {

std::vector<EcdfPoint> ecdf(std::span<const double> sample) {
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<EcdfPoint> out;
    const double n = static_cast<double>(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
        out.push_back({sorted[k], static_cast<double>(k + 1) / n});
    }
    return out;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size());
    const double m = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    return d;
}

double kolmogorov_q(double lambda) {
    if (lambda < 1e-3) return 1.0;
    // small lambda: use the Jacobi-transformed series, which converges fast there
    if (lambda < 1.0) {
        const double pi = 3.14159265358979323846;
        const double c = std::sqrt(2.0 * pi) / lambda;
        double cdf = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double odd = 2.0 * k - 1.0;
            cdf += std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
        }
        return std::clamp(1.0 - c * cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p_value(double d, double n_eff) {
    const double root = std::sqrt(n_eff);
    return kolmogorov_q((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

KsResult ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw ConfigError("ks_one_sample: empty sample");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double f = cdf(x[k]);
        d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
    }
    return {d, ks_p_value(d, n)};
}

KsResult ks_two_sample_test(std::span<const double> a, std::span<const double> b) {
    const double d = ks_two_sample(a, b);
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    return {d, ks_p_value(d, n * m / (n + m))};
}

ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_share) {
    if (observed.size() != expected_share.size() || observed.size() < 2) {
        throw ConfigError("chi_square_gof: need matching bins (>= 2)");
    }
    const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
    const double share_total = std::accumulate(expected_share.begin(), expected_share.end(), 0.0);
    if (!(total > 0.0) || !(share_total > 0.0)) throw ConfigError("chi_square_gof: empty counts");
    double stat = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const double expected = total * expected_share[k] / share_total;
        if (!(expected > 0.0)) {
            if (observed[k] > 0.0) return {std::numeric_limits<double>::infinity(), 0.0, 0.0};
            continue;
        }
        stat += (observed[k] - expected) * (observed[k] - expected) / expected;
    }
    const double dof = static_cast<double>(observed.size() - 1);
    const boost::math::chi_squared dist(dof);
    return {stat, dof, boost::math::cdf(boost::math::complement(dist, stat))};
}

}  // namespace mdhp::stats
