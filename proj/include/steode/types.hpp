// types.hpp - shared domain types.

#ifndef STEODE_TYPES_HPP
#define STEODE_TYPES_HPP

#include "steode/lingrad.hpp"

#include <string>
#include <vector>

namespace steode {

template <typename Scalar>
using Matrix = lingrad::Matrix<Scalar>;

using Mat = Matrix<double>;

/// Raw multivariate signal of one subject: N nodes x b timepoints.
struct BoldSeries {
    std::string subject_id;
    Mat values;
};

/// T-1 signed directed N x N networks, one per consecutive segment pair.
struct EffectiveSeries {
    std::vector<Mat> networks;
    double beta = 0.5;

    std::size_t length() const { return networks.size(); }
    Eigen::Index nodes() const { return networks.empty() ? 0 : networks.front().rows(); }
};

/// Undirected nonnegative spatial mask.
struct StructuralNetwork {
    Mat adjacency;
};

enum class TaskKind { classification, regression };

struct Task {
    TaskKind kind = TaskKind::classification;
    int outputs = 2; // class count, or 1 for regression

    static Task classification(int classes) { return {TaskKind::classification, classes}; }
    static Task regression() { return {TaskKind::regression, 1}; }
};

/// Class index for classification, target value for regression.
struct Label {
    double value = 0.0;

    int class_index() const { return static_cast<int>(value); }
};

/// One subject as consumed by the model: already-normalized adjacencies.
struct SubjectGraphs {
    Mat structural;              // normalized structural mask
    std::vector<Mat> effective;  // normalized directed networks
};

} // namespace steode

#endif // STEODE_TYPES_HPP
