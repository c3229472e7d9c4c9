// effconn.hpp - dynamic effective networks from multivariate time-series,
// plus the adjacency normalizations fed to the embedding layer.
//
// Row index = source node, column index = target node throughout.
// The exogenous input term of the causal model is taken as identically zero
// (resting-state assumption), so only the endogenous ratio form appears here.

#ifndef STEODE_EFFCONN_HPP
#define STEODE_EFFCONN_HPP

#include "steode/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace steode::effconn {

/// Denominator clamp used when a segment mean is (nearly) zero.
inline constexpr double kRatioEpsilon = 1e-6;

template <typename Scalar>
Scalar clamp_denominator(Scalar x, Scalar eps = Scalar(kRatioEpsilon)) {
    if (std::abs(x) >= eps)
        return x;
    return x < Scalar(0) ? -eps : eps;
}

/// Averages each of T contiguous segments of the columns of `series`
/// (N x b). When T does not divide b the first b mod T segments are one
/// sample longer.
template <typename Derived>
Matrix<typename Derived::Scalar> segment_means(const Eigen::MatrixBase<Derived>& series, Eigen::Index segments) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index b = series.cols();
    if (segments < 2)
        throw std::invalid_argument("segment_means: need at least 2 segments, got " + std::to_string(segments));
    if (segments > b) {
        std::ostringstream os;
        os << "segment_means: " << segments << " segments requested but only " << b << " timepoints";
        throw std::invalid_argument(os.str());
    }
    const Eigen::Index base = b / segments;
    const Eigen::Index extra = b % segments;
    Matrix<Scalar> out(series.rows(), segments);
    Eigen::Index start = 0;
    for (Eigen::Index t = 0; t < segments; ++t) {
        const Eigen::Index len = base + (t < extra ? 1 : 0);
        out.col(t) = series.middleCols(start, len).rowwise().mean();
        start += len;
    }
    return out;
}

/// A(t)[i,j] = beta * (means[j,t+1] / g(means[i,t]) - 1) for t = 0..T-2,
/// with g the sign-preserving epsilon clamp. Diagonal entries included.
template <typename Derived>
std::vector<Matrix<typename Derived::Scalar>> effective_adjacency_series(const Eigen::MatrixBase<Derived>& means,
                                                                         typename Derived::Scalar beta) {
    using Scalar = typename Derived::Scalar;
    if (means.cols() < 2)
        throw std::invalid_argument("effective_adjacency: need at least 2 segments");
    if (!(beta >= Scalar(0) && beta <= Scalar(1)))
        throw std::invalid_argument("effective_adjacency: beta must lie in [0,1]");
    const Eigen::Index n = means.rows();
    std::vector<Matrix<Scalar>> out;
    out.reserve(static_cast<std::size_t>(means.cols() - 1));
    for (Eigen::Index t = 0; t + 1 < means.cols(); ++t) {
        Eigen::Array<Scalar, Eigen::Dynamic, 1> denom = means.col(t).array();
        for (Eigen::Index i = 0; i < n; ++i)
            denom(i) = clamp_denominator(denom(i));
        const Eigen::Array<Scalar, 1, Eigen::Dynamic> next = means.col(t + 1).transpose().array();
        Matrix<Scalar> a(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            a.row(i) = (beta * (next / denom(i) - Scalar(1))).matrix();
        out.push_back(std::move(a));
    }
    return out;
}

inline EffectiveSeries effective_adjacency(const Mat& means, double beta) {
    return EffectiveSeries{effective_adjacency_series(means, beta), beta};
}

/// Divides the whole series by its largest absolute entry (one shared scale).
EffectiveSeries rescale_effective(EffectiveSeries series);

/// Divides by the largest entry. Rejects negative or asymmetric input.
StructuralNetwork rescale_structural(const StructuralNetwork& network);

/// Signed directed normalization: A[i,j] / sqrt(d_out(i) * d_in(j)) with
/// degrees taken on |A| and zero degrees replaced by 1.
template <typename Derived>
Matrix<typename Derived::Scalar> normalize_directed(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    if (a.rows() != a.cols())
        throw std::invalid_argument("normalize_directed: adjacency must be square");
    auto fix = [](Scalar d) { return d == Scalar(0) ? Scalar(1) : d; };
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> out_deg = a.cwiseAbs().rowwise().sum().array().unaryExpr(fix);
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> in_deg = a.cwiseAbs().colwise().sum().array().unaryExpr(fix);
    Matrix<Scalar> out(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        out.row(i) = a.row(i).array() / (out_deg(i) * in_deg).sqrt();
    return out;
}

/// Self-loop symmetric normalization D^-1/2 (A + I) D^-1/2.
template <typename Derived>
Matrix<typename Derived::Scalar> normalize_symmetric(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    if (a.rows() != a.cols())
        throw std::invalid_argument("normalize_structural: adjacency must be square");
    if (a != a.transpose())
        throw std::invalid_argument("normalize_structural: adjacency must be symmetric");
    Matrix<Scalar> hat = a + Matrix<Scalar>::Identity(a.rows(), a.cols());
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_sqrt = hat.rowwise().sum().array().sqrt().inverse();
    // (s_i * s_j) grouped first keeps the result bitwise symmetric.
    for (Eigen::Index i = 0; i < hat.rows(); ++i)
        for (Eigen::Index j = 0; j < hat.cols(); ++j)
            hat(i, j) *= inv_sqrt(i) * inv_sqrt(j);
    return hat;
}

Mat normalize_structural(const StructuralNetwork& network);

/// segment_means -> effective_adjacency -> rescale_effective.
EffectiveSeries build_effective(const BoldSeries& bold, Eigen::Index segments, double beta);

} // namespace steode::effconn

#endif // STEODE_EFFCONN_HPP
