#include "mdhp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mdhp {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr int kMaxRollbacks = 30;

// Flattened view of (alpha, beta, theta) used by the optimizer state.
Vector flatten(const Matrix& a, const Matrix& b, const Vector& t) {
    Vector out(a.size() + b.size() + t.size());
    out << a.reshaped(), b.reshaped(), t;
    return out;
}

void unflatten(const Vector& flat, MdhpParams& p) {
    const auto n = p.alpha.size();
    p.alpha.reshaped() = flat.segment(0, n);
    p.beta.reshaped() = flat.segment(n, n);
    p.theta = flat.segment(2 * n, p.theta.size());
}

void project(MdhpParams& p, double floor) {
    p.alpha = p.alpha.cwiseMax(0.0);
    p.beta = p.beta.cwiseMax(floor);
    p.theta = p.theta.cwiseMax(floor);
}

}  // namespace

void SolverConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(min_param > 0.0)) throw ConfigError("min_param must be > 0");
    if (!(standardize_max > standardize_min)) throw ConfigError("standardize_max must exceed standardize_min");
    if (!(init_alpha >= 0.0) || !(init_beta > 0.0) || !(init_theta > 0.0)) {
        throw ConfigError("initial parameters must be positive");
    }
    if (tol_rel < 0.0) throw ConfigError("tol_rel must be >= 0");
}

EventSequences standardize(const EventSequences& events, double lo, double hi) {
    if (!(hi > lo)) throw ConfigError("standardize: max must exceed min");
    // the output window is [0, hi], so lo must not be negative
    if (lo < 0.0) throw ConfigError("standardize: min must be >= 0");
    double t_min = std::numeric_limits<double>::infinity();
    double t_max = -std::numeric_limits<double>::infinity();
    for (const auto& seq : events.all()) {
        if (seq.empty()) continue;
        t_min = std::min(t_min, seq.front());
        t_max = std::max(t_max, seq.back());
    }
    if (!std::isfinite(t_min)) throw DataError("standardize: no timestamps in any dimension");
    // ties were nudged apart at ingestion, so a range of a few ulps is still degenerate
    if (!(t_max - t_min > 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_max)))) {
        throw DegenerateWindowError("standardize: all timestamps are identical");
    }
    const double scale = (hi - lo) / (t_max - t_min);
    std::vector<std::vector<double>> out(events.dims());
    for (std::size_t i = 0; i < events.dims(); ++i) {
        const auto src = events.times(i);
        out[i].reserve(src.size());
        for (double t : src) {
            out[i].push_back(std::clamp((t - t_min) * scale + lo, lo, hi));
        }
    }
    return EventSequences(std::move(out), hi);
}

EstimationResult estimate(const EventSequences& input, const SolverConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    const EventSequences events =
        cfg.standardize ? standardize(input, cfg.standardize_min, cfg.standardize_max) : input;
    const double t_span = events.t_span();
    if (!(t_span > 0.0)) throw DataError("estimate: window has zero length");
    const PaddedEvents pe = pad_and_stack(events);

    MdhpParams params = MdhpParams::uniform(events.dims(), cfg.init_alpha, cfg.init_beta, cfg.init_theta);
    project(params, cfg.min_param);

    LikelihoodGradient grad;
    double lnl = log_likelihood_and_grad(params, pe, t_span, grad, cfg.kernel);
    if (!std::isfinite(lnl)) throw NumericError("estimate: log-likelihood not finite at the initial point");

    EstimationResult result;
    result.t_span = t_span;
    result.lnl_trace.push_back(lnl);
    MdhpParams best = params;
    double best_lnl = lnl;

    Vector m = Vector::Zero(2 * params.alpha.size() + params.theta.size());
    Vector v = m;
    double lr = cfg.learning_rate;
    std::size_t stall = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const Vector g = flatten(grad.d_alpha, grad.d_beta, grad.d_theta);
        Vector direction;
        if (cfg.optimizer == OptimizerKind::adaptive_moment) {
            m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
            v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
            const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(epoch));
            const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(epoch));
            direction = (m / c1).array() / ((v / c2).array().sqrt() + kAdamEps);
        } else {
            direction = g;
        }

        const Vector base = flatten(params.alpha, params.beta, params.theta);
        MdhpParams candidate = params;
        LikelihoodGradient cand_grad;
        double cand_lnl = std::numeric_limits<double>::quiet_NaN();
        int rollbacks = 0;
        for (;;) {
            unflatten(base + lr * direction, candidate);
            project(candidate, cfg.min_param);
            cand_lnl = log_likelihood_and_grad(candidate, pe, t_span, cand_grad, cfg.kernel);
            if (std::isfinite(cand_lnl) && cand_grad.d_alpha.allFinite() && cand_grad.d_beta.allFinite() &&
                cand_grad.d_theta.allFinite()) {
                break;
            }
            if (++rollbacks > kMaxRollbacks) {
                throw NumericError("estimate: log-likelihood stays non-finite after step halving");
            }
            lr *= 0.5;
        }

        const double improvement = (cand_lnl - lnl) / std::max(std::abs(lnl), 1e-12);
        params = std::move(candidate);
        grad = std::move(cand_grad);
        lnl = cand_lnl;
        result.lnl_trace.push_back(lnl);
        result.epochs_run = epoch;
        if (lnl > best_lnl) {
            best_lnl = lnl;
            best = params;
        }
        stall = improvement < cfg.tol_rel ? stall + 1 : 0;
        if (cfg.patience > 0 && stall >= cfg.patience) break;
    }

    result.params = std::move(best);
    result.final_lnl = best_lnl;
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::string ThroughputReport::header() {
    return "Dim\tMax-T-Len\tMin-T-Len\tWindow-Cost\tThroughput";
}

std::string ThroughputReport::row() const {
    std::ostringstream os;
    os << dims << '\t' << max_len << '\t' << min_len << '\t' << std::fixed << std::setprecision(4)
       << window_cost << '\t' << throughput;
    return os.str();
}

BatchResult batch_estimate(const std::vector<EventSequences>& windows, const SolverConfig& cfg,
                           std::size_t workers) {
    cfg.validate();
    BatchResult batch;
    batch.outcomes.resize(windows.size());
    if (!windows.empty()) {
        const std::size_t dims = windows.front().dims();
        for (const auto& w : windows) {
            if (w.dims() != dims) throw ConfigError("batch_estimate: windows must share dims");
        }
        batch.report.dims = dims;
    }

    const auto n = static_cast<long long>(windows.size());
    const int threads = static_cast<int>(std::max<std::size_t>(workers, 1));
    // Inner kernels see a single thread when windows are fanned out.
    SolverConfig inner = cfg;
    if (threads > 1) inner.kernel = Kernel::serial;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (long long w = 0; w < n; ++w) {
        const auto idx = static_cast<std::size_t>(w);
        WindowOutcome& out = batch.outcomes[idx];
        out.messages = windows[idx].total_count();
        out.max_len = windows[idx].max_count();
        out.min_len = windows[idx].min_count();
        try {
            out.result = estimate(windows[idx], inner);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    }

    ThroughputReport& rep = batch.report;
    rep.windows = windows.size();
    double seconds = 0.0;
    std::size_t messages = 0;
    std::size_t done = 0;
    bool first = true;
    for (const auto& out : batch.outcomes) {
        rep.max_len = std::max(rep.max_len, out.max_len);
        rep.min_len = first ? out.min_len : std::min(rep.min_len, out.min_len);
        first = false;
        if (!out.result) {
            ++rep.failed;
            continue;
        }
        seconds += out.result->wall_seconds;
        messages += out.messages;
        ++done;
    }
    rep.window_cost = done > 0 ? seconds / static_cast<double>(done) : 0.0;
    rep.throughput = seconds > 0.0 ? static_cast<double>(messages) / seconds : 0.0;
    return batch;
}

ParamRecord ParamRecord::from_result(std::string window_id, const EstimationResult& r) {
    ParamRecord rec;
    rec.window_id = std::move(window_id);
    rec.dims = r.params.dims();
    const auto d = static_cast<Eigen::Index>(rec.dims);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            rec.alpha.push_back(r.params.alpha(i, j));
            rec.beta.push_back(r.params.beta(i, j));
        }
        rec.theta.push_back(r.params.theta(i));
    }
    rec.final_lnl = r.final_lnl;
    rec.epochs_run = r.epochs_run;
    rec.wall_seconds = r.wall_seconds;
    rec.t_span = r.t_span;
    return rec;
}

MdhpParams ParamRecord::params() const {
    const auto d = static_cast<Eigen::Index>(dims);
    if (alpha.size() != dims * dims || beta.size() != dims * dims || theta.size() != dims) {
        throw DataError("parameter record " + window_id + " has inconsistent shapes");
    }
    MdhpParams p{Matrix(d, d), Matrix(d, d), Vector(d)};
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            p.alpha(i, j) = alpha[static_cast<std::size_t>(i * d + j)];
            p.beta(i, j) = beta[static_cast<std::size_t>(i * d + j)];
        }
        p.theta(i) = theta[static_cast<std::size_t>(i)];
    }
    return p;
}

std::string ParamRecord::to_json_line() const {
    nlohmann::ordered_json j;
    j["window_id"] = window_id;
    j["dims"] = dims;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["theta"] = theta;
    j["final_lnl"] = final_lnl;
    j["epochs_run"] = epochs_run;
    j["wall_seconds"] = wall_seconds;
    j["t_span"] = t_span;
    if (!label.empty()) j["label"] = label;
    if (!split.empty()) j["split"] = split;
    if (scenario_id >= 0) j["scenario_id"] = scenario_id;
    return j.dump();
}

ParamRecord ParamRecord::from_json_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        ParamRecord rec;
        rec.window_id = j.at("window_id").get<std::string>();
        rec.dims = j.at("dims").get<std::size_t>();
        rec.alpha = j.at("alpha").get<std::vector<double>>();
        rec.beta = j.at("beta").get<std::vector<double>>();
        rec.theta = j.at("theta").get<std::vector<double>>();
        rec.final_lnl = j.at("final_lnl").get<double>();
        rec.epochs_run = j.at("epochs_run").get<std::size_t>();
        rec.wall_seconds = j.at("wall_seconds").get<double>();
        rec.t_span = j.value("t_span", 1.0);
        rec.label = j.value("label", std::string{});
        rec.split = j.value("split", std::string{});
        rec.scenario_id = j.value("scenario_id", -1);
        rec.params();
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed parameter record: ") + e.what());
    }
}

void write_param_dump(const std::string& path, const std::vector<ParamRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& rec : records) out << rec.to_json_line() << '\n';
    if (!out) throw IoError("failed writing " + path);
}

std::vector<ParamRecord> read_param_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<ParamRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(ParamRecord::from_json_line(line));
    }
    return records;
}

}  // namespace mdhp
