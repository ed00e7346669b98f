#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mdhp/events.hpp"
#include "mdhp/rng.hpp"

namespace oracle {

using mdhp::Matrix;
using mdhp::Vector;

inline mdhp::EventSequences random_events(mdhp::Rng& rng, std::size_t dims, std::size_t max_per_dim, double t_span) {
    std::vector<std::vector<double>> times(dims);
    for (auto& seq : times) {
        const std::size_t n = rng.below(max_per_dim + 1);
        for (std::size_t k = 0; k < n; ++k) seq.push_back(rng.uniform(0.0, t_span));
    }
    return mdhp::EventSequences(std::move(times), t_span);
}

inline mdhp::MdhpParams random_params(mdhp::Rng& rng, std::size_t dims) {
    const auto d = static_cast<Eigen::Index>(dims);
    mdhp::MdhpParams p{Matrix(d, d), Matrix(d, d), Vector(d)};
    for (Eigen::Index i = 0; i < d; ++i) {
        p.theta(i) = rng.uniform(0.1, 2.0);
        for (Eigen::Index j = 0; j < d; ++j) {
            p.alpha(i, j) = rng.uniform(0.0, 1.0);
            p.beta(i, j) = rng.uniform(0.5, 3.0);
        }
    }
    return p;
}

// lambda^i(v) straight from the definition.
inline double intensity(const mdhp::MdhpParams& p, const mdhp::EventSequences& ev, std::size_t i, double v) {
    const auto ii = static_cast<Eigen::Index>(i);
    double s = p.theta(ii);
    for (std::size_t j = 0; j < ev.dims(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        for (double t : ev.times(j)) {
            if (t < v) s += p.alpha(ii, jj) * std::exp(-p.beta(ii, jj) * (v - t));
        }
    }
    return s;
}

// Composite trapezoid on one smooth piece, doubling the panel count until
// successive Richardson estimates agree.
inline double integrate_piece(const std::function<double(double)>& f, double a, double b, int min_panels) {
    if (!(b > a)) return 0.0;
    auto trap = [&](int n) {
        const double h = (b - a) / n;
        double s = 0.5 * (f(a) + f(b));
        for (int k = 1; k < n; ++k) s += f(a + k * h);
        return s * h;
    };
    int n = std::max(min_panels, 2);
    double prev = trap(n);
    double prev_rich = prev;
    for (int iter = 0; iter < 12; ++iter) {
        n *= 2;
        const double cur = trap(n);
        const double rich = (4.0 * cur - prev) / 3.0;
        if (std::abs(rich - prev_rich) <= 1e-13 * std::max(1.0, std::abs(rich))) return rich;
        prev = cur;
        prev_rich = rich;
    }
    return prev_rich;
}

// sum_i int_0^T lambda^i(v) dv by adaptive trapezoid, split at every event
// (the intensity jumps there) and using at least `panels` panels in total.
inline double quadrature_compensator(const mdhp::MdhpParams& p, const mdhp::EventSequences& ev, int panels = 10000) {
    std::vector<double> cuts{0.0, ev.t_span()};
    for (const auto& seq : ev.all()) cuts.insert(cuts.end(), seq.begin(), seq.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const int per_piece = std::max(2, panels / static_cast<int>(cuts.size() - 1) + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < ev.dims(); ++i) {
        const auto f = [&](double v) { return intensity(p, ev, i, v); };
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            // evaluate strictly inside the piece so the left endpoint's event counts
            const double a = cuts[k];
            const double b = cuts[k + 1];
            const double eps = (b - a) * 1e-12;
            const auto g = [&](double v) { return f(std::clamp(v, a + eps, b)); };
            total += integrate_piece(g, a, b, per_piece);
        }
    }
    return total;
}

inline double rel_err(double a, double b, double floor = 1.0) {
    return std::abs(a - b) / std::max(floor, std::abs(b));
}

// Reference LSTM step (gates from the current input and the previous hidden
// state), written out with explicit loops. When `hks` is given the new cell
// state is scaled by it entrywise; without it this is the standard cell.
struct LstmRef {
    std::vector<double> h, c;
};

inline LstmRef lstm_step(const Matrix& Wi, const Matrix& Wf, const Matrix& Wc, const Matrix& Wo, const Matrix& Ui,
                         const Matrix& Uf, const Matrix& Uc, const Matrix& Uo, const Vector& bi, const Vector& bf,
                         const Vector& bc, const Vector& bo, const Vector& x, const Vector& h_prev,
                         const Vector& c_prev, const Vector* hks = nullptr) {
    const auto H = Wi.rows();
    LstmRef r{std::vector<double>(H), std::vector<double>(H)};
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (Eigen::Index k = 0; k < H; ++k) {
        double ai = bi(k), af = bf(k), ac = bc(k), ao = bo(k);
        for (Eigen::Index m = 0; m < x.size(); ++m) {
            ai += Wi(k, m) * x(m);
            af += Wf(k, m) * x(m);
            ac += Wc(k, m) * x(m);
            ao += Wo(k, m) * x(m);
        }
        for (Eigen::Index m = 0; m < H; ++m) {
            ai += Ui(k, m) * h_prev(m);
            af += Uf(k, m) * h_prev(m);
            ac += Uc(k, m) * h_prev(m);
            ao += Uo(k, m) * h_prev(m);
        }
        r.c[k] = sig(af) * c_prev(k) + sig(ai) * std::tanh(ac);
        if (hks) r.c[k] *= (*hks)(k);
        r.h[k] = sig(ao) * std::tanh(r.c[k]);
    }
    return r;
}

// Relative error used by the gradient checks: |a - n| / max(|a|, |n|, floor).
inline double grad_rel_err(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace oracle
