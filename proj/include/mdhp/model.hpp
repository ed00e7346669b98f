#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdhp/lstm.hpp"
#include "mdhp/traffic.hpp"

namespace mdhp::lstm {

/// Per-feature affine normalization (x - mean) / scale.
struct Scaler {
    Vector mean;
    Vector scale;

    static Scaler identity(std::size_t n);
    /// Column-wise fit over the columns of `data`; scales below 1e-8 become 1.
    static Scaler fit(const Matrix& data);
    Matrix apply(const Matrix& data) const;
    Vector apply(const Vector& v) const;
};

struct ModelConfig {
    std::size_t dims = 6;
    std::size_t hidden = 32;
    std::size_t layers = 2;

    void validate() const;
};

/// Input mapping (affine + tanh) -> stacked MDHP-LSTM layers -> mean pool
/// over time -> Linear + tanh + Linear producing (normal, attack) logits.
struct Model {
    ModelConfig cfg;
    Matrix smb_w;  // hidden x 11
    Vector smb_b;
    std::vector<CellWeights> cells;
    Matrix head_w1;  // hidden x hidden
    Vector head_b1;
    Matrix head_w2;  // 2 x hidden
    Vector head_b2;
    Scaler input_scaler;   // 11 message features
    Scaler hawkes_scaler;  // alpha_flat, beta_tspan_flat, theta stacked

    static Model zeros(const ModelConfig& cfg);
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget bias 1.
    static Model init(const ModelConfig& cfg, std::uint64_t seed);

    /// Trainable tensors in a fixed order: f(name, data, rows, cols).
    template <class F>
    void for_each_param(F&& f) {
        f("smb_w", smb_w.data(), smb_w.rows(), smb_w.cols());
        f("smb_b", smb_b.data(), smb_b.rows(), Eigen::Index{1});
        for (std::size_t l = 0; l < cells.size(); ++l) {
            cells[l].for_each([&](const char* name, double* data, Eigen::Index r, Eigen::Index c) {
                f("cell" + std::to_string(l) + "." + name, data, r, c);
            });
        }
        f("head_w1", head_w1.data(), head_w1.rows(), head_w1.cols());
        f("head_b1", head_b1.data(), head_b1.rows(), Eigen::Index{1});
        f("head_w2", head_w2.data(), head_w2.rows(), head_w2.cols());
        f("head_b2", head_b2.data(), head_b2.rows(), Eigen::Index{1});
    }

    /// Parameters plus the fitted scalers (what a checkpoint stores).
    template <class F>
    void for_each_tensor(F&& f) {
        for_each_param(f);
        f("input_scaler.mean", input_scaler.mean.data(), input_scaler.mean.rows(), Eigen::Index{1});
        f("input_scaler.scale", input_scaler.scale.data(), input_scaler.scale.rows(), Eigen::Index{1});
        f("hawkes_scaler.mean", hawkes_scaler.mean.data(), hawkes_scaler.mean.rows(), Eigen::Index{1});
        f("hawkes_scaler.scale", hawkes_scaler.scale.data(), hawkes_scaler.scale.rows(), Eigen::Index{1});
    }

    std::size_t parameter_count();
};

/// One classifier input: raw message features (11 x 128, timestamps
/// relative to the first message and divided by the window duration),
/// the window's Hawkes features, and the label (1 = attack).
struct Sample {
    Matrix x;
    HawkesFeatures hf;
    int label = 0;
    std::string id;
};

Sample make_sample(const traffic::Window& w, const HawkesFeatures& hf, std::string id = {});

/// Fits the model's input and Hawkes scalers on `samples`.
void fit_scalers(Model& model, const std::vector<Sample>& samples);

struct LayerTape {
    Vector hks;
    std::vector<CellTape> steps;
    Matrix out;  // hidden x T, the y outputs
};

struct ForwardTape {
    Matrix x;  // scaled input
    Matrix z;  // input mapping output, hidden x T
    HawkesFeatures hf;  // scaled
    std::vector<LayerTape> layers;
    Vector pooled, head_hidden, logits;
};

ForwardTape network_forward_tape(const Model& model, const Matrix& x, const HawkesFeatures& hf);
/// Logits (normal, attack).
Vector network_forward(const Model& model, const Matrix& x, const HawkesFeatures& hf);
Vector network_forward(const Model& model, const traffic::Window& w, const HawkesFeatures& hf);

/// Softmax cross-entropy of logits against `label`.
double cross_entropy(const Vector& logits, int label);

/// Loss of one sample and its gradient with respect to every trainable
/// tensor (written into `grads`, which must have the model's shapes).
/// The forward logits are copied to `logits` when given.
double loss_and_grad(const Model& model, const Sample& s, Model& grads, Vector* logits = nullptr);

struct TrainConfig {
    std::size_t max_epoch = 50;
    double learning_rate = 5e-5;
    double weight_decay = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t batch_size = 1;
    std::uint64_t seed_base = 1024;
    std::uint64_t rank = 0;
    std::size_t workers = 1;
    std::size_t hidden = 32;
    std::size_t layers = 2;

    std::uint64_t seed() const noexcept { return seed_base + rank; }
    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochStats> trace;
};

/// AdamW on mean cross-entropy over mini-batches. Per-sample gradients are
/// computed on `workers` threads and summed in sample order, so the result
/// does not depend on the worker count. Throws NumericError on a
/// non-finite loss.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg);

std::string trace_header();
std::string trace_row(const EpochStats& e);

struct RocPoint {
    double fpr;
    double tpr;
};

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double loss = 0.0;
    std::vector<RocPoint> roc;
    double auc = 0.0;
};

/// Metrics from attack scores (higher = more likely attack) and labels;
/// a sample is predicted attack when its score is > threshold. Throws
/// DataError when only one class is present.
Metrics metrics_from_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                            double threshold = 0.0);

/// Score = attack logit - normal logit.
Metrics evaluate(const Model& model, const std::vector<Sample>& samples, std::size_t workers = 1);

/// Binary blob at `path` plus a JSON manifest at `path + ".json"`.
void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg);
Model load_checkpoint(const std::string& path);

}  // namespace mdhp::lstm
