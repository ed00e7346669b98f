#include "mdhp/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mdhp {

namespace {

void check_shapes(const MdhpParams& params, const PaddedEvents& pe, double t_span) {
    if (params.dims() != pe.dims || static_cast<std::size_t>(params.alpha.rows()) != pe.dims ||
        static_cast<std::size_t>(params.beta.rows()) != pe.dims) {
        throw ConfigError("params dimension " + std::to_string(params.dims()) +
                          " does not match padded events dimension " + std::to_string(pe.dims));
    }
    if (!(t_span > 0.0)) {
        throw ConfigError("t_span must be positive");
    }
}

// Per-(i, a) row sums over b of e = exp(min(-beta_ij * tmpt, 80)) and of
// tmpt * e (the latter only where the clamp is inactive, since the clamped
// branch is constant in beta).
struct RowSums {
    std::vector<double> e;   // [i][a][j]
    std::vector<double> te;  // [i][a][j]
};

void row_sums_serial(const MdhpParams& params, const PaddedEvents& pe, RowSums& rs) {
    const std::size_t d = pe.dims;
    const std::size_t len = pe.max_len;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t a = 0; a < len; ++a) {
            if (!pe.mask[pe.slot(i, a)]) continue;
            for (std::size_t j = 0; j < d; ++j) {
                const double beta = params.beta(i, j);
                double se = 0.0;
                double ste = 0.0;
                for (std::size_t b = 0; b < len; ++b) {
                    const std::size_t idx = pe.pair(i, a, j, b);
                    if (!pe.pair_mask[idx]) continue;
                    const double arg = -beta * pe.tmpt[idx];
                    if (arg > kExpClamp) {
                        se += std::exp(kExpClamp);
                    } else {
                        const double e = std::exp(arg);
                        se += e;
                        ste += pe.tmpt[idx] * e;
                    }
                }
                rs.e[(i * len + a) * d + j] = se;
                rs.te[(i * len + a) * d + j] = ste;
            }
        }
    }
}

void row_sums_parallel(const MdhpParams& params, const PaddedEvents& pe, RowSums& rs) {
    const std::size_t d = pe.dims;
    const std::size_t len = pe.max_len;
    const auto rows = static_cast<long long>(d * len);
    const double* beta_data = params.beta.data();
    const auto beta_stride = static_cast<std::size_t>(params.beta.rows());
#pragma omp parallel for schedule(dynamic, 4)
    for (long long r = 0; r < rows; ++r) {
        const auto row = static_cast<std::size_t>(r);
        if (!pe.mask[row]) continue;
        const std::size_t i = row / len;
        for (std::size_t j = 0; j < d; ++j) {
            // column-major Eigen storage
            const double beta = beta_data[j * beta_stride + i];
            const std::size_t n = pe.prefix[row * d + j];
            const double* diffs = pe.tmpt.data() + (row * d + j) * len;
            double se = 0.0;
            double ste = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const double arg = -beta * diffs[b];
                if (arg > kExpClamp) {
                    se += std::exp(kExpClamp);
                } else {
                    const double e = std::exp(arg);
                    se += e;
                    ste += diffs[b] * e;
                }
            }
            rs.e[row * d + j] = se;
            rs.te[row * d + j] = ste;
        }
    }
}

// Shared evaluation. grad may be null when only the value is needed.
LikelihoodParts evaluate(const MdhpParams& params, const PaddedEvents& pe, double t_span,
                         Kernel kernel, LikelihoodGradient* grad) {
    check_shapes(params, pe, t_span);
    const std::size_t d = pe.dims;
    const std::size_t len = pe.max_len;
    const auto di = static_cast<Eigen::Index>(d);

    if (grad) {
        grad->d_alpha = Matrix::Zero(di, di);
        grad->d_beta = Matrix::Zero(di, di);
        grad->d_theta = Vector::Constant(di, -t_span);
    }

    LikelihoodParts parts;
    parts.part2 = -t_span * params.theta.sum();
    if (len == 0) return parts;

    RowSums rs{std::vector<double>(d * len * d, 0.0), std::vector<double>(d * len * d, 0.0)};
    if (kernel == Kernel::serial) {
        row_sums_serial(params, pe, rs);
    } else {
        row_sums_parallel(params, pe, rs);
    }

    // Part1, reduced in (i, a) order.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t a = 0; a < len; ++a) {
            if (!pe.mask[pe.slot(i, a)]) continue;
            const double* e = rs.e.data() + (i * len + a) * d;
            double lambda = params.theta(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < d; ++j) {
                lambda += params.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * e[j];
            }
            const bool floored = !(lambda > kLogFloor);
            parts.part1 += std::log(floored ? kLogFloor : lambda);
            if (grad && !floored) {
                const double w = 1.0 / lambda;
                const double* te = rs.te.data() + (i * len + a) * d;
                const auto ii = static_cast<Eigen::Index>(i);
                grad->d_theta(ii) += w;
                for (std::size_t j = 0; j < d; ++j) {
                    const auto jj = static_cast<Eigen::Index>(j);
                    grad->d_alpha(ii, jj) += w * e[j];
                    grad->d_beta(ii, jj) -= w * params.alpha(ii, jj) * te[j];
                }
            }
        }
    }

    // Part3 sums over every padded slot; padding equals t_span so those
    // slots contribute exp(0) - 1 = 0.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const double alpha = params.alpha(ii, jj);
            const double beta = params.beta(ii, jj);
            double k_sum = 0.0;
            double dk_sum = 0.0;
            for (std::size_t b = 0; b < len; ++b) {
                const double gap = t_span - pe.padded[pe.slot(j, b)];
                const double arg = -beta * gap;
                if (arg > kExpClamp) {
                    k_sum += std::exp(kExpClamp) - 1.0;
                } else {
                    const double e = std::exp(arg);
                    k_sum += e - 1.0;
                    dk_sum -= gap * e;
                }
            }
            parts.part3 += alpha / beta * k_sum;
            if (grad) {
                grad->d_alpha(ii, jj) += k_sum / beta;
                grad->d_beta(ii, jj) += -alpha / (beta * beta) * k_sum + alpha / beta * dk_sum;
            }
        }
    }
    return parts;
}

}  // namespace

double intensity_at(const MdhpParams& params, const EventSequences& events, std::size_t i, double t) {
    params.check_compatible(events);
    if (i >= events.dims()) {
        throw ConfigError("dimension index " + std::to_string(i) + " out of range");
    }
    const auto ii = static_cast<Eigen::Index>(i);
    double lambda = params.theta(ii);
    for (std::size_t j = 0; j < events.dims(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        for (double tk : events.times(j)) {
            if (!(tk < t)) break;
            lambda += params.alpha(ii, jj) * std::exp(-params.beta(ii, jj) * (t - tk));
        }
    }
    return lambda;
}

double gamma_closed_form(const MdhpParams& params, const EventSequences& events) {
    params.check_compatible(events);
    const double t_span = events.t_span();
    double gamma = t_span * params.theta.sum();
    for (std::size_t i = 0; i < events.dims(); ++i) {
        for (std::size_t j = 0; j < events.dims(); ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const double beta = params.beta(ii, jj);
            double inner = 0.0;
            for (double tz : events.times(j)) {
                inner += std::exp(-beta * (t_span - tz)) - 1.0;
            }
            gamma -= params.alpha(ii, jj) / beta * inner;
        }
    }
    return gamma;
}

double log_likelihood_naive(const MdhpParams& params, const EventSequences& events) {
    params.check_compatible(events);
    const std::size_t d = events.dims();
    const double t_span = events.t_span();

    double log_sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (double t : events.times(i)) {
            const double lambda = intensity_at(params, events, i, t);
            if (!std::isfinite(lambda) || !(lambda > 0.0)) {
                throw NumericError("naive log-likelihood: intensity " + std::to_string(lambda) +
                                   " at t=" + std::to_string(t) + " in dimension " + std::to_string(i));
            }
            log_sum += std::log(lambda);
        }
    }

    // Integrate each lambda^i exactly over the pieces between consecutive
    // events of the merged stream.
    std::vector<double> cuts{0.0};
    for (std::size_t j = 0; j < d; ++j) {
        for (double t : events.times(j)) cuts.push_back(t);
    }
    cuts.push_back(t_span);
    std::sort(cuts.begin(), cuts.end());

    double compensator = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double lo = cuts[c];
            const double hi = cuts[c + 1];
            if (!(hi > lo)) continue;
            double piece = params.theta(ii) * (hi - lo);
            for (std::size_t j = 0; j < d; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                const double alpha = params.alpha(ii, jj);
                const double beta = params.beta(ii, jj);
                for (double tk : events.times(j)) {
                    if (tk > lo) break;
                    piece += alpha / beta * (std::exp(-beta * (lo - tk)) - std::exp(-beta * (hi - tk)));
                }
            }
            compensator += piece;
        }
    }

    const double result = log_sum - compensator;
    if (!std::isfinite(result)) {
        throw NumericError("naive log-likelihood is not finite");
    }
    return result;
}

LikelihoodParts log_likelihood_parts(const MdhpParams& params, const PaddedEvents& pe, double t_span,
                                     Kernel kernel) {
    return evaluate(params, pe, t_span, kernel, nullptr);
}

double log_likelihood(const MdhpParams& params, const PaddedEvents& pe, double t_span, Kernel kernel) {
    return evaluate(params, pe, t_span, kernel, nullptr).total();
}

LikelihoodGradient grad_log_likelihood(const MdhpParams& params, const PaddedEvents& pe,
                                       double t_span, Kernel kernel) {
    LikelihoodGradient grad;
    evaluate(params, pe, t_span, kernel, &grad);
    return grad;
}

double log_likelihood_and_grad(const MdhpParams& params, const PaddedEvents& pe, double t_span,
                               LikelihoodGradient& grad, Kernel kernel) {
    return evaluate(params, pe, t_span, kernel, &grad).total();
}

}  // namespace mdhp
