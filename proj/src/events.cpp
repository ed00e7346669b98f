#include "mdhp/events.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mdhp {

EventSequences::EventSequences(std::vector<std::vector<double>> times, double t_span)
    : times_(std::move(times)), t_span_(t_span) {
    if (times_.empty()) {
        throw ConfigError("EventSequences requires at least one dimension");
    }
    if (!std::isfinite(t_span_) || t_span_ < 0.0) {
        throw ConfigError("t_span must be finite and non-negative");
    }
    for (auto& seq : times_) {
        for (double t : seq) {
            if (!std::isfinite(t) || t < 0.0 || t > t_span_) {
                throw DataError("timestamp " + std::to_string(t) + " outside [0, t_span]");
            }
        }
        std::sort(seq.begin(), seq.end());
        for (std::size_t k = 1; k < seq.size(); ++k) {
            if (seq[k] <= seq[k - 1]) {
                seq[k] = std::nextafter(seq[k - 1], std::numeric_limits<double>::infinity());
            }
        }
        // a nudged tail can step past t_span by a few ulps
        if (!seq.empty() && seq.back() > t_span_) {
            t_span_ = seq.back();
        }
    }
}

EventSequences EventSequences::empty(std::size_t dims, double t_span) {
    return EventSequences(std::vector<std::vector<double>>(dims), t_span);
}

std::size_t EventSequences::total_count() const noexcept {
    std::size_t n = 0;
    for (const auto& seq : times_) n += seq.size();
    return n;
}

std::size_t EventSequences::max_count() const noexcept {
    std::size_t n = 0;
    for (const auto& seq : times_) n = std::max(n, seq.size());
    return n;
}

std::size_t EventSequences::min_count() const noexcept {
    if (times_.empty()) return 0;
    std::size_t n = times_.front().size();
    for (const auto& seq : times_) n = std::min(n, seq.size());
    return n;
}

MdhpParams MdhpParams::uniform(std::size_t dims, double alpha, double beta, double theta) {
    const auto d = static_cast<Eigen::Index>(dims);
    return MdhpParams{Matrix::Constant(d, d, alpha), Matrix::Constant(d, d, beta),
                      Vector::Constant(d, theta)};
}

void MdhpParams::validate() const {
    const auto d = theta.size();
    if (d == 0) throw ConfigError("MdhpParams: theta is empty");
    if (alpha.rows() != d || alpha.cols() != d) throw ConfigError("MdhpParams: alpha must be D x D");
    if (beta.rows() != d || beta.cols() != d) throw ConfigError("MdhpParams: beta must be D x D");
    if (!alpha.allFinite() || !beta.allFinite() || !theta.allFinite()) {
        throw ConfigError("MdhpParams: non-finite entry");
    }
    if ((alpha.array() < 0.0).any()) throw ConfigError("MdhpParams: alpha must be >= 0");
    if ((beta.array() <= 0.0).any()) throw ConfigError("MdhpParams: beta must be > 0");
    if ((theta.array() < 0.0).any()) throw ConfigError("MdhpParams: theta must be >= 0");
}

void MdhpParams::check_compatible(const EventSequences& events) const {
    if (dims() != events.dims() || alpha.rows() != theta.size() || beta.rows() != theta.size()) {
        throw ConfigError("MdhpParams dimension " + std::to_string(dims()) +
                          " does not match events dimension " + std::to_string(events.dims()));
    }
}

}  // namespace mdhp
