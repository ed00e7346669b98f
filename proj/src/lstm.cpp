#include "mdhp/lstm.hpp"

#include <cmath>

namespace mdhp::lstm {

namespace {

Vector sigmoid(const Vector& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

CellWeights CellWeights::zeros(std::size_t input, std::size_t hidden, std::size_t dims) {
    const auto in = static_cast<Eigen::Index>(input);
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto d = static_cast<Eigen::Index>(dims);
    CellWeights w;
    for (Matrix* m : {&w.W_i, &w.W_f, &w.W_c, &w.W_o}) *m = Matrix::Zero(h, in);
    for (Matrix* m : {&w.U_i, &w.U_f, &w.U_c, &w.U_o, &w.W_y}) *m = Matrix::Zero(h, h);
    for (Vector* v : {&w.b_i, &w.b_f, &w.b_c, &w.b_o}) *v = Vector::Zero(h);
    w.A = Matrix::Zero(h, d * d);
    w.B = Matrix::Zero(h, d * d);
    w.C = Matrix::Zero(h, d);
    return w;
}

void CellWeights::validate() const {
    const Eigen::Index h = W_i.rows();
    const Eigen::Index in = W_i.cols();
    const Eigen::Index d = C.cols();
    bool ok = h > 0 && d > 0;
    for (const Matrix* m : {&W_i, &W_f, &W_c, &W_o}) ok = ok && m->rows() == h && m->cols() == in;
    for (const Matrix* m : {&U_i, &U_f, &U_c, &U_o, &W_y}) ok = ok && m->rows() == h && m->cols() == h;
    for (const Vector* v : {&b_i, &b_f, &b_c, &b_o}) ok = ok && v->size() == h;
    ok = ok && A.rows() == h && A.cols() == d * d && B.rows() == h && B.cols() == d * d && C.rows() == h;
    if (!ok) throw ConfigError("CellWeights: inconsistent shapes");
    bool finite = true;
    for (const Matrix* m : {&W_i, &W_f, &W_c, &W_o, &U_i, &U_f, &U_c, &U_o, &A, &B, &C, &W_y}) {
        finite = finite && m->allFinite();
    }
    for (const Vector* v : {&b_i, &b_f, &b_c, &b_o}) finite = finite && v->allFinite();
    if (!finite) throw ConfigError("CellWeights: non-finite entries");
}

HawkesFeatures HawkesFeatures::from_params(const MdhpParams& p, double t_span) {
    const Eigen::Index d = p.alpha.rows();
    HawkesFeatures hf;
    hf.alpha_flat.resize(d * d);
    hf.beta_tspan_flat.resize(d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            hf.alpha_flat(i * d + j) = p.alpha(i, j);
            hf.beta_tspan_flat(i * d + j) = p.beta(i, j) * t_span;
        }
    }
    hf.theta = p.theta;
    if (!hf.alpha_flat.allFinite() || !hf.beta_tspan_flat.allFinite() || !hf.theta.allFinite()) {
        throw DataError("HawkesFeatures: non-finite parameters");
    }
    return hf;
}

Vector hawkes_gate(const HawkesFeatures& hf, const CellWeights& w) {
    const Eigen::Index d = static_cast<Eigen::Index>(hf.dims());
    if (w.C.cols() != d || w.A.cols() != d * d || hf.alpha_flat.size() != d * d || hf.beta_tspan_flat.size() != d * d) {
        throw ConfigError("hawkes_gate: shape mismatch");
    }
    return (w.A * hf.alpha_flat - w.B * hf.beta_tspan_flat + w.C * hf.theta).array().tanh().matrix();
}

void hawkes_gate_backward(const HawkesFeatures& hf, const Vector& hks, const Vector& d_hks, CellWeights& grads) {
    const Vector du = d_hks.cwiseProduct((1.0 - hks.array().square()).matrix());
    grads.A.noalias() += du * hf.alpha_flat.transpose();
    grads.B.noalias() -= du * hf.beta_tspan_flat.transpose();
    grads.C.noalias() += du * hf.theta.transpose();
}

CellTape cell_forward(const Vector& x, const Vector& h_prev, const Vector& c_prev, const Vector& hks,
                      const CellWeights& w) {
    const Eigen::Index h = w.W_i.rows();
    if (x.size() != w.W_i.cols() || h_prev.size() != h || c_prev.size() != h || hks.size() != h) {
        throw ConfigError("cell_forward: shape mismatch");
    }
    CellTape t;
    t.x = x;
    t.h_prev = h_prev;
    t.c_prev = c_prev;
    t.hks = hks;
    t.i = sigmoid(w.W_i * x + w.U_i * h_prev + w.b_i);
    t.f = sigmoid(w.W_f * x + w.U_f * h_prev + w.b_f);
    t.o = sigmoid(w.W_o * x + w.U_o * h_prev + w.b_o);
    t.g = (w.W_c * x + w.U_c * h_prev + w.b_c).array().tanh().matrix();
    t.s = t.f.cwiseProduct(c_prev) + t.i.cwiseProduct(t.g);
    t.c = hks.cwiseProduct(t.s);
    t.tanh_c = t.c.array().tanh().matrix();
    t.h = t.o.cwiseProduct(t.tanh_c);
    t.y = w.W_y * t.h;
    return t;
}

CellInputGrads cell_backward(const CellTape& t, const CellWeights& w, const Vector& dh, const Vector& dc,
                             const Vector& dy, CellWeights& grads) {
    grads.W_y.noalias() += dy * t.h.transpose();
    Vector dh_total = dh;
    dh_total.noalias() += w.W_y.transpose() * dy;

    const Vector d_o = dh_total.cwiseProduct(t.tanh_c);
    const Vector dc_total =
        dc + dh_total.cwiseProduct(t.o).cwiseProduct((1.0 - t.tanh_c.array().square()).matrix());

    CellInputGrads out;
    out.hks = dc_total.cwiseProduct(t.s);
    const Vector ds = dc_total.cwiseProduct(t.hks);
    out.c_prev = ds.cwiseProduct(t.f);

    const Vector da_i = ds.cwiseProduct(t.g).cwiseProduct(t.i.cwiseProduct((1.0 - t.i.array()).matrix()));
    const Vector da_f = ds.cwiseProduct(t.c_prev).cwiseProduct(t.f.cwiseProduct((1.0 - t.f.array()).matrix()));
    const Vector da_o = d_o.cwiseProduct(t.o.cwiseProduct((1.0 - t.o.array()).matrix()));
    const Vector da_g = ds.cwiseProduct(t.i).cwiseProduct((1.0 - t.g.array().square()).matrix());

    grads.W_i.noalias() += da_i * t.x.transpose();
    grads.W_f.noalias() += da_f * t.x.transpose();
    grads.W_o.noalias() += da_o * t.x.transpose();
    grads.W_c.noalias() += da_g * t.x.transpose();
    grads.U_i.noalias() += da_i * t.h_prev.transpose();
    grads.U_f.noalias() += da_f * t.h_prev.transpose();
    grads.U_o.noalias() += da_o * t.h_prev.transpose();
    grads.U_c.noalias() += da_g * t.h_prev.transpose();
    grads.b_i += da_i;
    grads.b_f += da_f;
    grads.b_o += da_o;
    grads.b_c += da_g;

    out.x.noalias() = w.W_i.transpose() * da_i;
    out.x.noalias() += w.W_f.transpose() * da_f;
    out.x.noalias() += w.W_o.transpose() * da_o;
    out.x.noalias() += w.W_c.transpose() * da_g;
    out.h_prev.noalias() = w.U_i.transpose() * da_i;
    out.h_prev.noalias() += w.U_f.transpose() * da_f;
    out.h_prev.noalias() += w.U_o.transpose() * da_o;
    out.h_prev.noalias() += w.U_c.transpose() * da_g;
    return out;
}

}  // namespace mdhp::lstm
