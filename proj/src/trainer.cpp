#include "steode/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace steode::trainer {

std::vector<std::string> TrainConfig::validate() const {
    std::vector<std::string> errors;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok)
            errors.push_back(msg);
    };
    require(lr0 > 0.0 && std::isfinite(lr0), "lr0 must be a positive finite number");
    require(max_epochs >= 1, "max_epochs must be at least 1");
    require(patience >= 1, "patience must be at least 1");
    require(patience <= max_epochs, "patience must not exceed max_epochs");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(beta_dcm >= 0.0 && beta_dcm <= 1.0, "beta_dcm must lie in [0,1]");
    require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0,1]");
    require(segments >= 2, "segments must be at least 2");
    require(folds >= 2, "folds must be at least 2");
    require(task.outputs >= 1, "task outputs must be at least 1");
    require(task.kind != TaskKind::regression || task.outputs == 1, "regression tasks have exactly one output");
    require(feature_dim >= 1, "feature_dim must be at least 1");
    require(embed_dim >= 1, "embed_dim must be at least 1");
    require(hidden_dim >= 1, "hidden_dim must be at least 1");
    return errors;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch > cfg.max_epochs) {
        std::ostringstream os;
        os << "lr_schedule: epoch " << epoch << " outside [0, " << cfg.max_epochs << "]";
        throw std::out_of_range(os.str());
    }
    return cfg.lr0 * std::pow(1.0 - static_cast<double>(epoch) / cfg.max_epochs, 0.9);
}

AdamState AdamState::zeros_like(const model::ModelParams& params) {
    AdamState s;
    for (std::size_t k = 0; k < model::kAllSlots.size(); ++k) {
        const Mat& t = params.tensor(model::kAllSlots[k]);
        s.m[k] = Mat::Zero(t.rows(), t.cols());
        s.v[k] = Mat::Zero(t.rows(), t.cols());
    }
    return s;
}

void adam_step(model::ModelParams& params, const model::Gradients& grads, AdamState& state, double lr,
               const AdamHyper& hyper) {
    for (const auto& [slot, g] : grads) {
        const auto name = model::slot_name(static_cast<model::Slot>(slot));
        const Mat& t = params.tensor(static_cast<model::Slot>(slot));
        if (g.rows() != t.rows() || g.cols() != t.cols())
            throw lingrad::ShapeError("adam_step: gradient shape does not match " + std::string(name));
        if (!g.allFinite())
            throw std::runtime_error("adam_step: non-finite gradient for " + std::string(name));
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < model::kAllSlots.size(); ++k) {
        const auto it = grads.find(model::kAllSlots[k]);
        if (it == grads.end())
            continue;
        const Mat& g = it->second;
        state.m[k] = hyper.beta1 * state.m[k] + (1.0 - hyper.beta1) * g;
        state.v[k] = hyper.beta2 * state.v[k] + (1.0 - hyper.beta2) * g.cwiseProduct(g);
        Mat& t = params.tensor(model::kAllSlots[k]);
        t.array() -= lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + hyper.eps);
    }
}

double regularized_loss(double base, const model::ModelParams& params, double wd, bool include_gamma,
                        model::Gradients* grads) {
    if (wd < 0.0)
        throw std::invalid_argument("regularized_loss: weight decay must be non-negative");
    double penalty = 0.0;
    for (model::Slot slot : model::kAllSlots) {
        if (slot == model::kGamma && !include_gamma)
            continue;
        const Mat& t = params.tensor(slot);
        penalty += t.squaredNorm();
        if (grads != nullptr && wd != 0.0) {
            auto it = grads->find(slot);
            if (it == grads->end())
                grads->emplace(slot, 2.0 * wd * t);
            else
                it->second += 2.0 * wd * t;
        }
    }
    return base + wd * penalty;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 1 || n < k) {
        std::ostringstream os;
        os << "kfold_split: cannot split " << n << " items into " << k << " folds";
        throw std::invalid_argument(os.str());
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + len));
        std::sort(folds[f].begin(), folds[f].end());
        pos += len;
    }
    return folds;
}

Metrics evaluate(std::span<const double> predictions, std::span<const double> labels, const Task& task) {
    if (predictions.empty())
        throw std::invalid_argument("evaluate: no predictions");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("evaluate: predictions and labels differ in length");
    const double n = static_cast<double>(predictions.size());
    Metrics m;
    if (task.kind == TaskKind::regression) {
        double total = 0.0;
        for (std::size_t i = 0; i < predictions.size(); ++i)
            total += std::abs(predictions[i] - labels[i]);
        m.mae = total / n;
        return m;
    }
    std::set<int> classes;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        classes.insert(static_cast<int>(predictions[i]));
        classes.insert(static_cast<int>(labels[i]));
        correct += predictions[i] == labels[i] ? 1 : 0;
    }
    double f1_sum = 0.0;
    for (int c : classes) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            const bool pred = static_cast<int>(predictions[i]) == c;
            const bool truth = static_cast<int>(labels[i]) == c;
            tp += pred && truth;
            fp += pred && !truth;
            fn += !pred && truth;
        }
        f1_sum += 2.0 * tp / (2.0 * tp + fp + fn);
    }
    m.accuracy = static_cast<double>(correct) / n;
    m.f1 = f1_sum / static_cast<double>(classes.size());
    return m;
}

double batch_objective(const Dataset& data, std::span<const std::size_t> indices, const model::ModelParams& params,
                       model::Gradients* grads) {
    if (indices.empty())
        throw std::invalid_argument("batch_objective: empty batch");
    const double inv = 1.0 / static_cast<double>(indices.size());
    double total = 0.0;
    if (grads != nullptr)
        grads->clear();
    for (std::size_t idx : indices) {
        if (grads == nullptr) {
            const Mat out = model::predict(data.subjects[idx], data.features, params, data.task);
            total += model::loss(out, data.labels[idx], data.task);
            continue;
        }
        model::SubjectEvaluation ev =
            model::evaluate_subject(data.subjects[idx], data.features, params, data.labels[idx], data.task);
        total += ev.loss;
        for (auto& [slot, g] : ev.grads) {
            auto it = grads->find(slot);
            if (it == grads->end())
                grads->emplace(slot, std::move(g));
            else
                it->second += g;
        }
    }
    if (!std::isfinite(total))
        throw std::runtime_error("batch_objective: non-finite loss");
    if (grads != nullptr)
        for (auto& [slot, g] : *grads)
            g *= inv;
    return total * inv;
}

std::vector<double> predict_all(const Dataset& data, std::span<const std::size_t> indices,
                                const model::ModelParams& params) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t idx : indices)
        out.push_back(model::decode_output(model::predict(data.subjects[idx], data.features, params, data.task),
                                           data.task));
    return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Metrics metrics_on(const Dataset& data, std::span<const std::size_t> indices, const model::ModelParams& params) {
    const std::vector<double> preds = predict_all(data, indices, params);
    std::vector<double> labels;
    labels.reserve(indices.size());
    for (std::size_t idx : indices)
        labels.push_back(data.labels[idx].value);
    return evaluate(preds, labels, data.task);
}

} // namespace

FoldReport train_fold(const Dataset& data, std::span<const std::size_t> train_idx,
                      std::span<const std::size_t> val_idx, const TrainConfig& cfg, int fold_index,
                      const std::optional<model::ModelParams>& initial) {
    if (train_idx.empty() || val_idx.empty())
        throw std::invalid_argument("train_fold: train and validation sets must be nonempty");
    if (data.subjects.empty())
        throw std::invalid_argument("train_fold: empty dataset");

    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(fold_index)));
    model::ModelParams params;
    if (initial) {
        params = *initial;
    } else {
        model::Dimensions dims;
        dims.nodes = data.subjects.front().structural.rows();
        dims.features = data.features.cols();
        dims.embedding = cfg.embed_dim;
        dims.hidden = cfg.hidden_dim;
        dims.outputs = data.task.outputs;
        params = model::ModelParams::init(dims, cfg.lambda, rng);
    }
    AdamState state = AdamState::zeros_like(params);

    FoldReport report;
    report.fold = fold_index;
    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    model::ModelParams best_params = params;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            const std::span<const std::size_t> chunk(order.data() + start, len);
            model::Gradients grads;
            const double base = batch_objective(data, chunk, params, &grads);
            const double total = regularized_loss(base, params, cfg.weight_decay, cfg.decay_gamma, &grads);
            epoch_loss += total * static_cast<double>(len);
            adam_step(params, grads, state, lr);
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        const double val = batch_objective(data, val_idx, params, nullptr);
        report.val_loss.push_back(val);
        report.stop_epoch = epoch + 1;
        if (val < best) {
            best = val;
            best_params = params;
            report.best_epoch = epoch + 1;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    report.train_metrics = metrics_on(data, train_idx, best_params);
    report.val_metrics = metrics_on(data, val_idx, best_params);
    report.params = std::move(best_params);
    return report;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty())
        return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values)
        ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    return s;
}

TrainReport cross_validate(const Dataset& data, const TrainConfig& cfg) {
    if (const auto errors = cfg.validate(); !errors.empty())
        throw std::invalid_argument("cross_validate: invalid config: " + errors.front());
    const auto splits = kfold_split(data.size(), static_cast<std::size_t>(cfg.folds), cfg.seed);
    TrainReport report;
    for (std::size_t f = 0; f < splits.size(); ++f) {
        std::vector<std::size_t> train;
        for (std::size_t g = 0; g < splits.size(); ++g)
            if (g != f)
                train.insert(train.end(), splits[g].begin(), splits[g].end());
        std::sort(train.begin(), train.end());
        report.folds.push_back(train_fold(data, train, splits[f], cfg, static_cast<int>(f)));
    }

    auto collect = [&](auto pick) {
        std::vector<double> xs;
        for (const FoldReport& f : report.folds)
            if (auto v = pick(f))
                xs.push_back(*v);
        return xs.empty() ? std::optional<Summary>{} : std::optional<Summary>{summarize(xs)};
    };
    report.accuracy = collect([](const FoldReport& f) { return f.val_metrics.accuracy; });
    report.f1 = collect([](const FoldReport& f) { return f.val_metrics.f1; });
    report.mae = collect([](const FoldReport& f) { return f.val_metrics.mae; });
    report.train_accuracy = collect([](const FoldReport& f) { return f.train_metrics.accuracy; });
    return report;
}

} // namespace steode::trainer
