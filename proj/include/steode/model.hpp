// model.hpp - structural-effective embedding, residual temporal unroll,
// pooling, MLP head and losses.

#ifndef STEODE_MODEL_HPP
#define STEODE_MODEL_HPP

#include "steode/lingrad.hpp"
#include "steode/types.hpp"

#include <array>
#include <map>
#include <random>
#include <string_view>
#include <vector>

namespace steode::model {

using Tape = lingrad::Tape<double>;
using Var = lingrad::Var<double>;
using Gradients = std::map<lingrad::ParamId, Mat>;

/// Gradient keys of the trainable tensors.
enum Slot : lingrad::ParamId { kW = 0, kGamma, kW1, kB1, kW2, kB2 };

inline constexpr std::array<Slot, 6> kAllSlots = {kW, kGamma, kW1, kB1, kW2, kB2};

std::string_view slot_name(Slot slot);

struct Dimensions {
    Eigen::Index nodes = 0;
    Eigen::Index features = 16; // c
    Eigen::Index embedding = 16; // d
    Eigen::Index hidden = 64;   // h
    Eigen::Index outputs = 2;   // o
};

struct MlpHead {
    Mat W1; // d x h
    Mat b1; // 1 x h
    Mat W2; // h x o
    Mat b2; // 1 x o
};

struct ModelParams {
    Mat W;      // c x d, node embedding weight
    Mat gamma;  // N x N, edge-importance mask
    double lambda = 0.5;
    MlpHead mlp;

    Mat& tensor(Slot slot);
    const Mat& tensor(Slot slot) const;
    Dimensions dims() const;

    /// gamma = ones, W and MLP weights Glorot-uniform, biases zero.
    static ModelParams init(const Dimensions& dims, double lambda, std::mt19937_64& rng);
};

/// Node features drawn once from a standard Gaussian (N x c).
Mat gaussian_features(Eigen::Index nodes, Eigen::Index features, std::uint64_t seed);

/// Parameters as they appear on one tape.
struct BoundParams {
    Var W, gamma, W1, b1, W2, b2;
    double lambda = 0.5;
};

/// Registers the trainable tensors (or constants when the tape has grad off).
BoundParams bind(Tape& tape, const ModelParams& params);

// --- tape-level operations ---

Var mix_directions(const Var& a_f, double lambda);
Var embed_layer(const Var& a_s, const Var& a_f, const Var& x, const BoundParams& p);
Var unroll(const std::vector<Var>& series, const Var& a_s, const Var& x, const BoundParams& p);
Var global_pool(const Var& z);
Var head_forward(const Var& pooled, const BoundParams& p, const Task& task);
Var loss(const Var& out, const Label& y, const Task& task);

// --- value-level conveniences (each runs a gradient-free tape) ---

Mat mix_directions(const Mat& a_f, double lambda);
Mat embed_layer(const Mat& a_s, const Mat& a_f, const Mat& x, const ModelParams& params);
Mat unroll(const std::vector<Mat>& series, const Mat& a_s, const Mat& x, const ModelParams& params);
Mat global_pool(const Mat& z);
Mat head_forward(const Mat& pooled, const ModelParams& params, const Task& task);
double loss(const Mat& out, const Label& y, const Task& task);

/// Full forward for one subject: unroll -> pool -> head. Returns the head output.
Mat predict(const SubjectGraphs& subject, const Mat& x, const ModelParams& params, const Task& task);

/// Per-subject loss with gradients for every trainable tensor.
struct SubjectEvaluation {
    double loss = 0.0;
    Mat output;
    Gradients grads;
};

SubjectEvaluation evaluate_subject(const SubjectGraphs& subject, const Mat& x, const ModelParams& params,
                                   const Label& y, const Task& task);

/// Predicted class (argmax) or regression value from a head output row.
double decode_output(const Mat& output, const Task& task);

} // namespace steode::model

#endif // STEODE_MODEL_HPP
