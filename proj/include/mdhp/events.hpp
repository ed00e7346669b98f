#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mdhp/common.hpp"

namespace mdhp {

/// Per-dimension event timestamps over an observation window [0, t_span].
///
/// Construction sorts each dimension and breaks exact ties inside a
/// dimension by nudging the later copy up by one ulp, so every stored
/// sequence is strictly ascending. Ties across dimensions are kept.
class EventSequences {
public:
    EventSequences() = default;
    EventSequences(std::vector<std::vector<double>> times, double t_span);

    /// Empty sequences for `dims` dimensions.
    static EventSequences empty(std::size_t dims, double t_span);

    std::size_t dims() const noexcept { return times_.size(); }
    double t_span() const noexcept { return t_span_; }
    std::span<const double> times(std::size_t i) const { return times_.at(i); }
    const std::vector<std::vector<double>>& all() const noexcept { return times_; }

    std::size_t count(std::size_t i) const { return times_.at(i).size(); }
    std::size_t total_count() const noexcept;
    std::size_t max_count() const noexcept;
    std::size_t min_count() const noexcept;

private:
    std::vector<std::vector<double>> times_;
    double t_span_ = 0.0;
};

/// Exponential-kernel MDHP parameters.
struct MdhpParams {
    Matrix alpha;  // D x D excitation, alpha(i, j): effect of j on i
    Matrix beta;   // D x D decay rates
    Vector theta;  // D baseline intensities

    std::size_t dims() const noexcept { return static_cast<std::size_t>(theta.size()); }

    static MdhpParams uniform(std::size_t dims, double alpha, double beta, double theta);

    /// Throws ConfigError unless shapes agree and alpha >= 0, beta > 0, theta >= 0.
    void validate() const;
    /// Throws ConfigError if dims differ from `events`.
    void check_compatible(const EventSequences& events) const;
};

}  // namespace mdhp
