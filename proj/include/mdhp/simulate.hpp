#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdhp/events.hpp"

namespace mdhp {

struct SimConfig {
    MdhpParams params;
    double t_span = 1.0;
    std::uint64_t seed = 0;
    std::size_t max_events = 1'000'000;

    /// Throws ConfigError on invalid values; returns advisory warnings
    /// (e.g. spectral radius of alpha/beta >= 1, an explosive process).
    std::vector<std::string> validate() const;
};

/// Spectral radius of the branching matrix alpha ./ beta.
double branching_ratio(const MdhpParams& params);

/// Ogata thinning. The proposal rate is the summed intensity just after the
/// current time, which bounds the intensity until the next event because
/// every kernel decays. Throws NumericError when max_events is exceeded.
EventSequences simulate_mdhp(const SimConfig& cfg);

/// Compensator increments Lambda_i(T_i^k) - Lambda_i(T_i^{k-1}) for every
/// event of every dimension (with T_i^{-1} = 0). Under the true parameters
/// they are i.i.d. Exponential(1).
std::vector<double> time_rescaled_gaps(const MdhpParams& params, const EventSequences& events);

}  // namespace mdhp
