#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mdhp/events.hpp"
#include "mdhp/likelihood.hpp"
#include "mdhp/padded.hpp"

namespace mdhp {

enum class OptimizerKind { plain_gd, adaptive_moment };

struct SolverConfig {
    std::size_t max_epochs = 300;
    double learning_rate = 0.05;
    OptimizerKind optimizer = OptimizerKind::adaptive_moment;
    double init_alpha = 0.5;
    double init_beta = 1.0;
    double init_theta = 0.1;
    double min_param = 1e-4;
    double tol_rel = 1e-6;
    std::size_t patience = 10;
    bool standardize = true;
    double standardize_min = 0.0;
    double standardize_max = 1.0;
    Kernel kernel = Kernel::parallel;

    void validate() const;
};

struct EstimationResult {
    MdhpParams params;
    double final_lnl = 0.0;
    std::size_t epochs_run = 0;
    std::vector<double> lnl_trace;
    double wall_seconds = 0.0;
    // t_span of the data the parameters were fitted on
    double t_span = 0.0;
};

/// Raised when every timestamp in a window is identical.
class DegenerateWindowError : public DataError {
public:
    using DataError::DataError;
};

/// Affine map of all timestamps (jointly over dimensions) onto [lo, hi];
/// the result has t_span = hi. Throws DataError on all-empty input and
/// DegenerateWindowError when the timestamps span a zero-length range.
EventSequences standardize(const EventSequences& events, double lo, double hi);

/// Projected gradient ascent on the log-likelihood. Parameters are clamped
/// after every step: alpha >= 0, beta >= min_param, theta >= min_param. The
/// best parameters seen are returned, so final_lnl >= lnl_trace[0].
EstimationResult estimate(const EventSequences& events, const SolverConfig& cfg);

struct WindowOutcome {
    std::optional<EstimationResult> result;
    std::string error;  // non-empty when result is absent
    std::size_t messages = 0;
    std::size_t max_len = 0;
    std::size_t min_len = 0;
};

struct ThroughputReport {
    std::size_t dims = 0;
    std::size_t max_len = 0;
    std::size_t min_len = 0;
    std::size_t windows = 0;
    std::size_t failed = 0;
    double window_cost = 0.0;  // mean seconds per estimated window
    double throughput = 0.0;   // messages per second of estimation time

    /// Dim / Max-T-Len / Min-T-Len / Window-Cost / Throughput, tab separated.
    static std::string header();
    std::string row() const;
};

struct BatchResult {
    std::vector<WindowOutcome> outcomes;
    ThroughputReport report;
};

/// Estimates each window independently. With workers > 1 the windows are
/// spread over OpenMP threads; outcomes keep input order and failures are
/// isolated per window.
BatchResult batch_estimate(const std::vector<EventSequences>& windows, const SolverConfig& cfg,
                           std::size_t workers = 1);

/// One line of the parameter dump (JSON Lines).
struct ParamRecord {
    std::string window_id;
    std::size_t dims = 0;
    std::vector<double> alpha;  // row-major
    std::vector<double> beta;   // row-major
    std::vector<double> theta;
    double final_lnl = 0.0;
    std::size_t epochs_run = 0;
    double wall_seconds = 0.0;
    double t_span = 0.0;
    std::string label;  // optional context carried from the dataset
    std::string split;
    int scenario_id = -1;

    static ParamRecord from_result(std::string window_id, const EstimationResult& r);
    MdhpParams params() const;
    std::string to_json_line() const;
    static ParamRecord from_json_line(const std::string& line);
};

void write_param_dump(const std::string& path, const std::vector<ParamRecord>& records);
std::vector<ParamRecord> read_param_dump(const std::string& path);

}  // namespace mdhp
