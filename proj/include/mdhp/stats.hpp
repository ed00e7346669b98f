#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace mdhp::stats {

struct EcdfPoint {
    double value;
    double cumulative;
};

/// Empirical CDF at each distinct sample value.
std::vector<EcdfPoint> ecdf(std::span<const double> sample);

/// sup_x |F_a(x) - F_b(x)| between two empirical CDFs.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

struct KsResult {
    double statistic;
    double p_value;
};

/// One-sample KS test against a continuous CDF. The p-value uses the
/// asymptotic distribution with Stephens' effective-n correction.
KsResult ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf);

/// Two-sample KS test, same asymptotic p-value with n_eff = n m / (n + m).
KsResult ks_two_sample_test(std::span<const double> a, std::span<const double> b);

struct ChiSquareResult {
    double statistic;
    double dof;
    double p_value;
};

/// Pearson goodness of fit of observed counts against expected proportions
/// (rescaled to the observed total). dof = bins - 1.
ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_share);

}  // namespace mdhp::stats
