#include "mdhp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>

#include <nlohmann/json.hpp>

#include "mdhp/rng.hpp"

namespace mdhp::lstm {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'H', 'P', 'L', 'S', 'T', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

Vector stack_hawkes(const HawkesFeatures& hf) {
    Vector v(hf.alpha_flat.size() + hf.beta_tspan_flat.size() + hf.theta.size());
    v << hf.alpha_flat, hf.beta_tspan_flat, hf.theta;
    return v;
}

HawkesFeatures split_hawkes(const Vector& v, Eigen::Index d) {
    HawkesFeatures hf;
    hf.alpha_flat = v.segment(0, d * d);
    hf.beta_tspan_flat = v.segment(d * d, d * d);
    hf.theta = v.segment(2 * d * d, d);
    return hf;
}

std::vector<std::span<double>> param_spans(Model& m) {
    std::vector<std::span<double>> out;
    m.for_each_param([&](const std::string&, double* data, Eigen::Index r, Eigen::Index c) {
        out.emplace_back(data, static_cast<std::size_t>(r * c));
    });
    return out;
}

void set_zero(Model& m) {
    for (auto s : param_spans(m)) std::fill(s.begin(), s.end(), 0.0);
}

Vector softmax(const Vector& logits) {
    const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
    return e / e.sum();
}

}  // namespace

// ---- Scaler ----

Scaler Scaler::identity(std::size_t n) {
    return {Vector::Zero(static_cast<Eigen::Index>(n)), Vector::Ones(static_cast<Eigen::Index>(n))};
}

Scaler Scaler::fit(const Matrix& data) {
    if (data.cols() == 0) throw DataError("Scaler::fit: no data");
    Scaler s;
    s.mean = data.rowwise().mean();
    const Matrix centered = data.colwise() - s.mean;
    s.scale = (centered.array().square().rowwise().sum() / static_cast<double>(data.cols())).sqrt().matrix();
    for (Eigen::Index k = 0; k < s.scale.size(); ++k) {
        if (!(s.scale(k) > 1e-8)) s.scale(k) = 1.0;
    }
    return s;
}

Matrix Scaler::apply(const Matrix& data) const {
    return ((data.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Vector Scaler::apply(const Vector& v) const { return ((v - mean).array() / scale.array()).matrix(); }

// ---- model ----

void ModelConfig::validate() const {
    if (dims < 1) throw ConfigError("model dims must be >= 1");
    if (hidden < 1) throw ConfigError("model hidden size must be >= 1");
    if (layers < 1 || layers > 2) throw ConfigError("model layers must be 1 or 2");
}

Model Model::zeros(const ModelConfig& cfg) {
    cfg.validate();
    const auto h = static_cast<Eigen::Index>(cfg.hidden);
    const auto f = static_cast<Eigen::Index>(traffic::kFeatureCount);
    Model m;
    m.cfg = cfg;
    m.smb_w = Matrix::Zero(h, f);
    m.smb_b = Vector::Zero(h);
    for (std::size_t l = 0; l < cfg.layers; ++l) m.cells.push_back(CellWeights::zeros(cfg.hidden, cfg.hidden, cfg.dims));
    m.head_w1 = Matrix::Zero(h, h);
    m.head_b1 = Vector::Zero(h);
    m.head_w2 = Matrix::Zero(2, h);
    m.head_b2 = Vector::Zero(2);
    m.input_scaler = Scaler::identity(traffic::kFeatureCount);
    m.hawkes_scaler = Scaler::identity(2 * cfg.dims * cfg.dims + cfg.dims);
    return m;
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
    Model m = zeros(cfg);
    Rng rng(seed);
    m.for_each_param([&](const std::string& name, double* data, Eigen::Index r, Eigen::Index c) {
        if (c == 1) return;  // biases start at zero
        const double bound = 1.0 / std::sqrt(static_cast<double>(c));
        for (Eigen::Index k = 0; k < r * c; ++k) data[k] = rng.uniform(-bound, bound);
        (void)name;
    });
    for (auto& cell : m.cells) cell.b_f.setOnes();
    return m;
}

std::size_t Model::parameter_count() {
    std::size_t n = 0;
    for_each_param([&](const std::string&, double*, Eigen::Index r, Eigen::Index c) {
        n += static_cast<std::size_t>(r * c);
    });
    return n;
}

Sample make_sample(const traffic::Window& w, const HawkesFeatures& hf, std::string id) {
    if (w.messages.size() != traffic::kWindowSize) throw DataError("make_sample: window must hold 128 messages");
    Sample s;
    s.x.resize(static_cast<Eigen::Index>(traffic::kFeatureCount), static_cast<Eigen::Index>(traffic::kWindowSize));
    const double t0 = w.messages.front().timestamp;
    const double duration = w.messages.back().timestamp - t0;
    for (std::size_t k = 0; k < w.messages.size(); ++k) {
        const auto f = w.messages[k].fields();
        for (std::size_t j = 0; j < traffic::kFeatureCount; ++j) {
            s.x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = f[j];
        }
        s.x(static_cast<Eigen::Index>(traffic::kFeatureCount - 1), static_cast<Eigen::Index>(k)) =
            duration > 0.0 ? (f[traffic::kFeatureCount - 1] - t0) / duration : 0.0;
    }
    s.hf = hf;
    s.label = w.label == traffic::Label::attack ? 1 : 0;
    s.id = std::move(id);
    return s;
}

void fit_scalers(Model& model, const std::vector<Sample>& samples) {
    if (samples.empty()) throw DataError("fit_scalers: empty sample set");
    const Eigen::Index cols = samples.front().x.cols();
    Matrix all(samples.front().x.rows(), cols * static_cast<Eigen::Index>(samples.size()));
    const auto hdim = static_cast<Eigen::Index>(2 * model.cfg.dims * model.cfg.dims + model.cfg.dims);
    Matrix hawkes(hdim, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].x.cols() != cols || samples[k].hf.dims() != model.cfg.dims) {
            throw DataError("fit_scalers: inconsistent sample shapes");
        }
        all.middleCols(static_cast<Eigen::Index>(k) * cols, cols) = samples[k].x;
        hawkes.col(static_cast<Eigen::Index>(k)) = stack_hawkes(samples[k].hf);
    }
    model.input_scaler = Scaler::fit(all);
    model.hawkes_scaler = Scaler::fit(hawkes);
}

ForwardTape network_forward_tape(const Model& model, const Matrix& x, const HawkesFeatures& hf) {
    const auto d = static_cast<Eigen::Index>(model.cfg.dims);
    if (x.rows() != static_cast<Eigen::Index>(traffic::kFeatureCount) ||
        x.cols() != static_cast<Eigen::Index>(traffic::kWindowSize)) {
        throw ConfigError("network_forward: input must be 11 x 128");
    }
    if (static_cast<Eigen::Index>(hf.dims()) != d) throw ConfigError("network_forward: Hawkes feature dims mismatch");

    ForwardTape t;
    t.x = model.input_scaler.apply(x);
    t.z = ((model.smb_w * t.x).colwise() + model.smb_b).array().tanh().matrix();
    t.hf = split_hawkes(model.hawkes_scaler.apply(stack_hawkes(hf)), d);

    const Eigen::Index steps = x.cols();
    const auto h = static_cast<Eigen::Index>(model.cfg.hidden);
    const Matrix* in = &t.z;
    t.layers.resize(model.cells.size());
    for (std::size_t l = 0; l < model.cells.size(); ++l) {
        const CellWeights& w = model.cells[l];
        LayerTape& lt = t.layers[l];
        lt.hks = hawkes_gate(t.hf, w);
        lt.out.resize(h, steps);
        lt.steps.reserve(static_cast<std::size_t>(steps));
        Vector hs = Vector::Zero(h);
        Vector cs = Vector::Zero(h);
        for (Eigen::Index k = 0; k < steps; ++k) {
            lt.steps.push_back(cell_forward(in->col(k), hs, cs, lt.hks, w));
            const CellTape& ct = lt.steps.back();
            lt.out.col(k) = ct.y;
            hs = ct.h;
            cs = ct.c;
        }
        in = &lt.out;
    }
    t.pooled = in->rowwise().mean();
    t.head_hidden = (model.head_w1 * t.pooled + model.head_b1).array().tanh().matrix();
    t.logits = model.head_w2 * t.head_hidden + model.head_b2;
    return t;
}

Vector network_forward(const Model& model, const Matrix& x, const HawkesFeatures& hf) {
    return network_forward_tape(model, x, hf).logits;
}

Vector network_forward(const Model& model, const traffic::Window& w, const HawkesFeatures& hf) {
    return network_forward(model, make_sample(w, hf).x, hf);
}

double cross_entropy(const Vector& logits, int label) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits(label);
}

double loss_and_grad(const Model& model, const Sample& s, Model& g, Vector* logits) {
    if (s.label != 0 && s.label != 1) throw DataError("sample label must be 0 or 1");
    set_zero(g);
    const ForwardTape t = network_forward_tape(model, s.x, s.hf);
    const double loss = cross_entropy(t.logits, s.label);
    if (logits) *logits = t.logits;

    Vector dlogits = softmax(t.logits);
    dlogits(s.label) -= 1.0;
    g.head_w2.noalias() += dlogits * t.head_hidden.transpose();
    g.head_b2 += dlogits;
    const Vector da1 =
        (model.head_w2.transpose() * dlogits).cwiseProduct((1.0 - t.head_hidden.array().square()).matrix());
    g.head_w1.noalias() += da1 * t.pooled.transpose();
    g.head_b1 += da1;
    const Vector dpooled = model.head_w1.transpose() * da1;

    const Eigen::Index steps = s.x.cols();
    const auto h = static_cast<Eigen::Index>(model.cfg.hidden);
    Matrix d_out = dpooled.replicate(1, steps) / static_cast<double>(steps);
    for (std::size_t l = model.cells.size(); l-- > 0;) {
        const CellWeights& w = model.cells[l];
        CellWeights& gw = g.cells[l];
        const LayerTape& lt = t.layers[l];
        Matrix d_in(h, steps);
        Vector dh = Vector::Zero(h);
        Vector dc = Vector::Zero(h);
        Vector dhks = Vector::Zero(h);
        for (Eigen::Index k = steps; k-- > 0;) {
            const CellInputGrads gi = cell_backward(lt.steps[static_cast<std::size_t>(k)], w, dh, dc, d_out.col(k), gw);
            d_in.col(k) = gi.x;
            dh = gi.h_prev;
            dc = gi.c_prev;
            dhks += gi.hks;
        }
        hawkes_gate_backward(t.hf, lt.hks, dhks, gw);
        d_out = std::move(d_in);
    }
    const Matrix dpre = d_out.cwiseProduct((1.0 - t.z.array().square()).matrix());
    g.smb_w.noalias() += dpre * t.x.transpose();
    g.smb_b += dpre.rowwise().sum();
    return loss;
}

// ---- training ----

void TrainConfig::validate() const {
    if (max_epoch < 1) throw ConfigError("max_epoch must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    ModelConfig{1, hidden, layers}.validate();
}

namespace {

struct Scored {
    std::vector<double> scores;
    std::vector<double> losses;
};

Scored score_all(const Model& model, const std::vector<Sample>& samples, std::size_t workers) {
    Scored out;
    out.scores.resize(samples.size());
    out.losses.resize(samples.size());
    const auto n = static_cast<long long>(samples.size());
    const int threads = static_cast<int>(std::max<std::size_t>(workers, 1));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (long long k = 0; k < n; ++k) {
        const Sample& s = samples[static_cast<std::size_t>(k)];
        const Vector logits = network_forward(model, s.x, s.hf);
        out.scores[static_cast<std::size_t>(k)] = logits(1) - logits(0);
        out.losses[static_cast<std::size_t>(k)] = cross_entropy(logits, s.label);
    }
    return out;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double accuracy(const std::vector<double>& scores, const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) correct += (scores[k] > 0.0 ? 1 : 0) == samples[k].label;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    const ModelConfig mcfg{train_set.front().hf.dims(), cfg.hidden, cfg.layers};

    TrainResult res;
    res.model = Model::init(mcfg, cfg.seed());
    Model& model = res.model;
    fit_scalers(model, train_set);

    const auto params = param_spans(model);
    std::size_t total = 0;
    for (auto s : params) total += s.size();
    std::vector<double> m1(total, 0.0);
    std::vector<double> m2(total, 0.0);

    const std::size_t batch = std::min(cfg.batch_size, train_set.size());
    std::vector<Model> grads(batch, Model::zeros(mcfg));
    std::vector<std::vector<std::span<double>>> grad_spans;
    for (auto& g : grads) grad_spans.push_back(param_spans(g));
    std::vector<double> losses(batch);
    std::vector<double> scores(batch);
    std::vector<double> step(total);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t t_step = 0;
    const int threads = static_cast<int>(cfg.workers);

    for (std::size_t epoch = 0; epoch < cfg.max_epoch; ++epoch) {
        Rng rng(derive_seed(cfg.seed(), "epoch", epoch));
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            const auto n = static_cast<long long>(len);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
            for (long long b = 0; b < n; ++b) {
                const auto bi = static_cast<std::size_t>(b);
                const Sample& s = train_set[order[start + bi]];
                Vector logits;
                losses[bi] = loss_and_grad(model, s, grads[bi], &logits);
                scores[bi] = logits(1) - logits(0);
            }
            for (std::size_t b = 0; b < len; ++b) {
                if (!std::isfinite(losses[b])) {
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " on sample '" +
                                       train_set[order[start + b]].id + "'");
                }
                loss_sum += losses[b];
                correct += (scores[b] > 0.0 ? 1 : 0) == train_set[order[start + b]].label;
            }

            // mean gradient, summed in sample order
            std::size_t off = 0;
            for (std::size_t p = 0; p < params.size(); ++p) {
                for (std::size_t e = 0; e < params[p].size(); ++e) {
                    double acc = 0.0;
                    for (std::size_t b = 0; b < len; ++b) acc += grad_spans[b][p][e];
                    step[off + e] = acc / static_cast<double>(len);
                }
                off += params[p].size();
            }

            ++t_step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_step));
            off = 0;
            for (auto s : params) {
                for (std::size_t e = 0; e < s.size(); ++e) {
                    const double gr = step[off + e];
                    m1[off + e] = cfg.beta1 * m1[off + e] + (1.0 - cfg.beta1) * gr;
                    m2[off + e] = cfg.beta2 * m2[off + e] + (1.0 - cfg.beta2) * gr * gr;
                    s[e] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
                    s[e] -= cfg.learning_rate * (m1[off + e] / bc1) / (std::sqrt(m2[off + e] / bc2) + cfg.eps);
                }
                off += s.size();
            }
        }

        EpochStats st;
        st.epoch = epoch + 1;
        st.train_loss = loss_sum / static_cast<double>(train_set.size());
        st.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        if (!val_set.empty()) {
            const Scored v = score_all(model, val_set, cfg.workers);
            st.val_loss = mean(v.losses);
            st.val_accuracy = accuracy(v.scores, val_set);
        }
        res.trace.push_back(st);
    }
    return res;
}

std::string trace_header() { return "epoch\ttrain_loss\ttrain_acc\tval_loss\tval_acc"; }

std::string trace_row(const EpochStats& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu\t%.10g\t%.6f\t%.10g\t%.6f", e.epoch, e.train_loss, e.train_accuracy,
                  e.val_loss, e.val_accuracy);
    return buf;
}

// ---- evaluation ----

Metrics metrics_from_scores(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size()) throw ConfigError("metrics: scores and labels differ in length");
    Metrics m;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const bool actual = labels[k] == 1;
        const bool predicted = scores[k] > threshold;
        pos += actual;
        if (actual && predicted) ++m.tp;
        else if (!actual && predicted) ++m.fp;
        else if (!actual) ++m.tn;
        else ++m.fn;
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("metrics: both classes are required for ROC");
    const double n = static_cast<double>(scores.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / n;
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = static_cast<double>(m.tp) / static_cast<double>(pos);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    m.roc.push_back({0.0, 0.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (labels[idx[k]] == 1) ++tp;
        else ++fp;
        if (k + 1 < idx.size() && scores[idx[k + 1]] == scores[idx[k]]) continue;
        m.roc.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
    }
    for (std::size_t k = 1; k < m.roc.size(); ++k) {
        m.auc += (m.roc[k].fpr - m.roc[k - 1].fpr) * (m.roc[k].tpr + m.roc[k - 1].tpr) / 2.0;
    }
    return m;
}

Metrics evaluate(const Model& model, const std::vector<Sample>& samples, std::size_t workers) {
    if (samples.empty()) throw DataError("evaluate: empty dataset");
    const Scored s = score_all(model, samples, workers);
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& x : samples) labels.push_back(x.label);
    Metrics m = metrics_from_scores(s.scores, labels);
    m.loss = mean(s.losses);
    return m;
}

// ---- checkpoints ----

void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, sizeof kMagic);
    const std::uint32_t header[4] = {kFormatVersion, static_cast<std::uint32_t>(model.cfg.dims),
                                     static_cast<std::uint32_t>(model.cfg.hidden),
                                     static_cast<std::uint32_t>(model.cfg.layers)};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    model.for_each_tensor([&](const std::string& name, double* data, Eigen::Index r, Eigen::Index c) {
        const std::uint64_t shape[2] = {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c)};
        out.write(reinterpret_cast<const char*>(shape), sizeof shape);
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(double) * r * c));
        tensors.push_back({{"name", name}, {"shape", {r, c}}});
    });
    if (!out) throw IoError("failed writing " + path);

    nlohmann::ordered_json manifest;
    manifest["format"] = "mdhp-lstm-checkpoint";
    manifest["format_version"] = kFormatVersion;
    manifest["tool_version"] = kToolVersion;
    manifest["model"] = {{"dims", model.cfg.dims}, {"hidden", model.cfg.hidden}, {"layers", model.cfg.layers}};
    manifest["seed"] = cfg.seed();
    manifest["train"] = {{"max_epoch", cfg.max_epoch},       {"learning_rate", cfg.learning_rate},
                         {"weight_decay", cfg.weight_decay}, {"beta1", cfg.beta1},
                         {"beta2", cfg.beta2},               {"eps", cfg.eps},
                         {"batch_size", cfg.batch_size},     {"seed_base", cfg.seed_base},
                         {"rank", cfg.rank}};
    manifest["parameter_count"] = model.parameter_count();
    manifest["tensors"] = std::move(tensors);
    std::ofstream mf(path + ".json", std::ios::binary);
    if (!mf) throw IoError("cannot open " + path + ".json for writing");
    mf << manifest.dump(2) << '\n';
    if (!mf) throw IoError("failed writing " + path + ".json");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[sizeof kMagic];
    std::uint32_t header[4];
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError(path + " is not a model checkpoint");
    if (header[0] != kFormatVersion) throw DataError("unsupported checkpoint version " + std::to_string(header[0]));
    Model model = Model::zeros(ModelConfig{header[1], header[2], header[3]});
    model.for_each_tensor([&](const std::string& name, double* data, Eigen::Index r, Eigen::Index c) {
        std::uint64_t shape[2];
        in.read(reinterpret_cast<char*>(shape), sizeof shape);
        if (!in || shape[0] != static_cast<std::uint64_t>(r) || shape[1] != static_cast<std::uint64_t>(c)) {
            throw DataError("checkpoint tensor " + name + " has unexpected shape");
        }
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(double) * r * c));
        if (!in) throw DataError("checkpoint truncated in " + name);
    });
    return model;
}

}  // namespace mdhp::lstm
