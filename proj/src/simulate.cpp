#include "mdhp/simulate.hpp"

#include <cmath>
#include <sstream>

#include "mdhp/rng.hpp"

namespace mdhp {

double branching_ratio(const MdhpParams& params) {
    const Matrix ratio = params.alpha.cwiseQuotient(params.beta);
    return ratio.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<std::string> SimConfig::validate() const {
    params.validate();
    if (!(t_span > 0.0) || !std::isfinite(t_span)) throw ConfigError("SimConfig: t_span must be positive");
    if (max_events < 1) throw ConfigError("SimConfig: max_events must be >= 1");
    std::vector<std::string> warnings;
    const double rho = branching_ratio(params);
    if (rho >= 1.0) {
        std::ostringstream os;
        os << "branching ratio " << rho << " >= 1: process is not stationary";
        warnings.push_back(os.str());
    }
    return warnings;
}

EventSequences simulate_mdhp(const SimConfig& cfg) {
    cfg.validate();
    const auto& p = cfg.params;
    const auto d = static_cast<Eigen::Index>(p.dims());
    Rng rng(cfg.seed);

    std::vector<std::vector<double>> times(static_cast<std::size_t>(d));
    // excitation(i, j): current contribution of dimension j's past events to lambda^i
    Matrix excitation = Matrix::Zero(d, d);
    Vector lambda(d);
    double t = 0.0;
    std::size_t total = 0;

    for (;;) {
        const double bound = p.theta.sum() + excitation.sum();
        if (!(bound > 0.0)) break;
        const double step = rng.exponential_mean(1.0 / bound);
        const double next = t + step;
        if (next > cfg.t_span) break;
        excitation.array() *= (-p.beta.array() * step).exp();
        t = next;
        lambda = p.theta + excitation.rowwise().sum();

        const double u = rng.uniform() * bound;
        double cumulative = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            cumulative += lambda(i);
            if (u < cumulative) {
                times[static_cast<std::size_t>(i)].push_back(t);
                excitation.col(i) += p.alpha.col(i);
                if (++total > cfg.max_events) {
                    throw NumericError("simulate_mdhp: more than " + std::to_string(cfg.max_events) +
                                       " events; parameters are likely unstable");
                }
                break;
            }
        }
    }
    return EventSequences(std::move(times), cfg.t_span);
}

std::vector<double> time_rescaled_gaps(const MdhpParams& params, const EventSequences& events) {
    params.check_compatible(events);
    const std::size_t d = events.dims();
    auto compensator = [&](std::size_t i, double t) {
        const auto ii = static_cast<Eigen::Index>(i);
        double value = params.theta(ii) * t;
        for (std::size_t j = 0; j < d; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double alpha = params.alpha(ii, jj);
            const double beta = params.beta(ii, jj);
            for (double tk : events.times(j)) {
                if (!(tk < t)) break;
                value += alpha / beta * (-std::expm1(-beta * (t - tk)));
            }
        }
        return value;
    };

    std::vector<double> gaps;
    for (std::size_t i = 0; i < d; ++i) {
        double prev = 0.0;
        for (double t : events.times(i)) {
            const double cur = compensator(i, t);
            gaps.push_back(cur - prev);
            prev = cur;
        }
    }
    return gaps;
}

}  // namespace mdhp
