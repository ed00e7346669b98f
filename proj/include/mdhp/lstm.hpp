#pragma once

#include <cstddef>
#include <string>

#include "mdhp/common.hpp"
#include "mdhp/events.hpp"

namespace mdhp::lstm {

/// Weights of one MDHP-LSTM cell: a standard LSTM plus the Hawkes gate
/// (A, B, C) and the output projection W_y.
struct CellWeights {
    Matrix W_i, W_f, W_c, W_o;  // hidden x input
    Matrix U_i, U_f, U_c, U_o;  // hidden x hidden
    Vector b_i, b_f, b_c, b_o;
    Matrix A, B;  // hidden x D^2
    Matrix C;     // hidden x D
    Matrix W_y;   // hidden x hidden

    static CellWeights zeros(std::size_t input, std::size_t hidden, std::size_t dims);

    std::size_t input_size() const noexcept { return static_cast<std::size_t>(W_i.cols()); }
    std::size_t hidden_size() const noexcept { return static_cast<std::size_t>(W_i.rows()); }
    std::size_t dims() const noexcept { return static_cast<std::size_t>(C.cols()); }

    /// Calls f(name, data, rows, cols) for every tensor in a fixed order.
    template <class F>
    void for_each(F&& f) {
        f("W_i", W_i.data(), W_i.rows(), W_i.cols());
        f("W_f", W_f.data(), W_f.rows(), W_f.cols());
        f("W_c", W_c.data(), W_c.rows(), W_c.cols());
        f("W_o", W_o.data(), W_o.rows(), W_o.cols());
        f("U_i", U_i.data(), U_i.rows(), U_i.cols());
        f("U_f", U_f.data(), U_f.rows(), U_f.cols());
        f("U_c", U_c.data(), U_c.rows(), U_c.cols());
        f("U_o", U_o.data(), U_o.rows(), U_o.cols());
        f("b_i", b_i.data(), b_i.rows(), Eigen::Index{1});
        f("b_f", b_f.data(), b_f.rows(), Eigen::Index{1});
        f("b_c", b_c.data(), b_c.rows(), Eigen::Index{1});
        f("b_o", b_o.data(), b_o.rows(), Eigen::Index{1});
        f("A", A.data(), A.rows(), A.cols());
        f("B", B.data(), B.rows(), B.cols());
        f("C", C.data(), C.rows(), C.cols());
        f("W_y", W_y.data(), W_y.rows(), W_y.cols());
    }

    /// Throws ConfigError on inconsistent shapes or non-finite entries.
    void validate() const;
};

/// Window-level Hawkes inputs of the gate: alpha and beta * t_span
/// flattened row-major, and theta.
struct HawkesFeatures {
    Vector alpha_flat;
    Vector beta_tspan_flat;
    Vector theta;

    std::size_t dims() const noexcept { return static_cast<std::size_t>(theta.size()); }
    static HawkesFeatures from_params(const MdhpParams& p, double t_span);
};

/// tanh(A alpha - B (beta t_span) + C theta).
Vector hawkes_gate(const HawkesFeatures& hf, const CellWeights& w);

/// Accumulates the gradients of A, B, C given d loss / d hks.
void hawkes_gate_backward(const HawkesFeatures& hf, const Vector& hks, const Vector& d_hks, CellWeights& grads);

/// Values cached by cell_forward for the backward pass.
struct CellTape {
    Vector x, h_prev, c_prev, hks;
    Vector i, f, o, g;  // gates and candidate
    Vector s;           // f * c_prev + i * g
    Vector c, tanh_c, h, y;
};

/// One step: i, f, o = sigmoid(W x + U h_prev + b), g = tanh(...),
/// c = hks * (f * c_prev + i * g), h = o * tanh(c), y = W_y h.
CellTape cell_forward(const Vector& x, const Vector& h_prev, const Vector& c_prev, const Vector& hks,
                      const CellWeights& w);

struct CellInputGrads {
    Vector x, h_prev, c_prev, hks;
};

/// Reverse pass of one step given upstream d h, d c, d y. Parameter
/// gradients are added into `grads`.
CellInputGrads cell_backward(const CellTape& tape, const CellWeights& w, const Vector& dh, const Vector& dc,
                             const Vector& dy, CellWeights& grads);

}  // namespace mdhp::lstm
