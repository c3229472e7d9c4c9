// trainer.hpp - Adam with polynomial decay, L2 penalty, early stopping,
// k-fold cross-validation and metrics.

#ifndef STEODE_TRAINER_HPP
#define STEODE_TRAINER_HPP

#include "steode/model.hpp"
#include "steode/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace steode::trainer {

struct TrainConfig {
    double lr0 = 0.001;
    int max_epochs = 500;
    int patience = 100;
    int batch_size = 128;
    double weight_decay = 1e-5;
    bool decay_gamma = false;
    double beta_dcm = 0.5;
    double lambda = 0.5;
    int segments = 5; // T
    std::uint64_t seed = 0;
    Task task = Task::classification(2);
    int folds = 5;
    int feature_dim = 16; // c
    int embed_dim = 16;   // d
    int hidden_dim = 64;  // h

    /// Every violated constraint, in field order. Empty means valid.
    std::vector<std::string> validate() const;
};

/// Learning rate after `epoch` completed epochs: lr0 * (1 - epoch/max)^0.9.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct AdamState {
    std::array<Mat, model::kAllSlots.size()> m;
    std::array<Mat, model::kAllSlots.size()> v;
    long step = 0;

    static AdamState zeros_like(const model::ModelParams& params);
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of every tensor that has a gradient.
/// Throws std::runtime_error naming the tensor on a non-finite gradient.
void adam_step(model::ModelParams& params, const model::Gradients& grads, AdamState& state, double lr,
               const AdamHyper& hyper = {});

/// base + wd * sum of squared entries of W and MLP tensors (and gamma when
/// `include_gamma`). Adds the penalty gradient into `grads` when given.
double regularized_loss(double base, const model::ModelParams& params, double wd, bool include_gamma = false,
                        model::Gradients* grads = nullptr);

/// k disjoint folds covering 0..n-1; the first n mod k folds hold one extra index.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> mae;
};

/// Accuracy and macro-F1 (classes that never occur in either vector are
/// skipped), or MAE for regression.
Metrics evaluate(std::span<const double> predictions, std::span<const double> labels, const Task& task);

/// Model inputs for a whole cohort.
struct Dataset {
    std::vector<SubjectGraphs> subjects;
    std::vector<Label> labels;
    Mat features; // shared N x c node features
    Task task;

    std::size_t size() const { return subjects.size(); }
};

/// Mean base loss over `indices` with the summed per-subject gradients
/// reduced in index order, then divided by the count.
double batch_objective(const Dataset& data, std::span<const std::size_t> indices, const model::ModelParams& params,
                       model::Gradients* grads);

struct FoldReport {
    int fold = 0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int stop_epoch = 0; // 1-based count of epochs run
    int best_epoch = 0; // 1-based epoch of the reported snapshot
    Metrics train_metrics;
    Metrics val_metrics;
    model::ModelParams params; // best-validation snapshot
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;
};

struct TrainReport {
    std::vector<FoldReport> folds;
    std::optional<Summary> accuracy;
    std::optional<Summary> f1;
    std::optional<Summary> mae;
    std::optional<Summary> train_accuracy;
};

/// Trains on `train_idx`, early-stops on `val_idx`.
FoldReport train_fold(const Dataset& data, std::span<const std::size_t> train_idx,
                      std::span<const std::size_t> val_idx, const TrainConfig& cfg, int fold_index,
                      const std::optional<model::ModelParams>& initial = std::nullopt);

/// Predictions (decoded) for the given subjects.
std::vector<double> predict_all(const Dataset& data, std::span<const std::size_t> indices,
                                const model::ModelParams& params);

/// Full k-fold cross-validation; fold f validates on split f.
TrainReport cross_validate(const Dataset& data, const TrainConfig& cfg);

Summary summarize(std::span<const double> values);

} // namespace steode::trainer

#endif // STEODE_TRAINER_HPP
