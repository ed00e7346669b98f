#pragma once

#include <cstddef>

#include "mdhp/events.hpp"
#include "mdhp/padded.hpp"

namespace mdhp {

/// Upper clamp applied to every exponent argument before exp().
inline constexpr double kExpClamp = 80.0;
/// Floor applied to the intensity before taking its log.
inline constexpr double kLogFloor = 1e-300;

/// Which implementation of the tensor kernel to run. `serial` walks the full
/// masked 4-D tensor in one thread and is kept as the reference; `parallel`
/// splits rows across OpenMP threads and only visits the valid prefix of
/// each row. Both reduce in the same fixed order.
enum class Kernel { serial, parallel };

/// lambda^i(t) = theta_i + sum_j sum_{k: T_j^k < t} alpha_ij exp(-beta_ij (t - T_j^k)).
double intensity_at(const MdhpParams& params, const EventSequences& events, std::size_t i, double t);

/// Compensator sum_i int_0^{t_span} lambda^i(v) dv in closed form.
double gamma_closed_form(const MdhpParams& params, const EventSequences& events);

/// Brute-force log-likelihood: nested loops over the raw sequences with the
/// compensator integrated piecewise between consecutive events. No padding,
/// no clamping. Throws NumericError on any non-finite or non-positive
/// intensity. Test oracle only.
double log_likelihood_naive(const MdhpParams& params, const EventSequences& events);

struct LikelihoodParts {
    double part1 = 0.0;  // sum of log-intensities at the events
    double part2 = 0.0;  // -t_span * sum(theta)
    double part3 = 0.0;  // sum_ij alpha/beta * sum_k (exp(-beta (t_span - T_j^k)) - 1)
    double total() const noexcept { return part1 + part2 + part3; }
};

struct LikelihoodGradient {
    Matrix d_alpha;
    Matrix d_beta;
    Vector d_theta;
};

LikelihoodParts log_likelihood_parts(const MdhpParams& params, const PaddedEvents& pe, double t_span,
                                     Kernel kernel = Kernel::parallel);

/// Optimized log-likelihood over precomputed padded events. NaN propagates.
double log_likelihood(const MdhpParams& params, const PaddedEvents& pe, double t_span,
                      Kernel kernel = Kernel::parallel);

/// Analytic partial derivatives of log_likelihood with respect to alpha, beta, theta.
LikelihoodGradient grad_log_likelihood(const MdhpParams& params, const PaddedEvents& pe,
                                       double t_span, Kernel kernel = Kernel::parallel);

/// Value and gradient in one pass; what the solver calls every epoch.
double log_likelihood_and_grad(const MdhpParams& params, const PaddedEvents& pe, double t_span,
                               LikelihoodGradient& grad, Kernel kernel = Kernel::parallel);

}  // namespace mdhp
