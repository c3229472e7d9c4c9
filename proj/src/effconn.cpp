#include "steode/effconn.hpp"

#include <algorithm>
#include <stdexcept>

namespace steode::effconn {

EffectiveSeries rescale_effective(EffectiveSeries series) {
    double max_abs = 0.0;
    for (const Mat& a : series.networks)
        max_abs = std::max(max_abs, a.cwiseAbs().maxCoeff());
    if (max_abs == 0.0)
        return series;
    for (Mat& a : series.networks)
        a /= max_abs;
    return series;
}

namespace {

void check_structural(const Mat& a, const char* op) {
    if (a.rows() != a.cols())
        throw std::invalid_argument(std::string(op) + ": structural adjacency must be square");
    if ((a.array() < 0.0).any())
        throw std::invalid_argument(std::string(op) + ": structural adjacency has a negative entry");
    if (a != a.transpose())
        throw std::invalid_argument(std::string(op) + ": structural adjacency must be symmetric");
}

} // namespace

StructuralNetwork rescale_structural(const StructuralNetwork& network) {
    check_structural(network.adjacency, "rescale_structural");
    const double top = network.adjacency.size() == 0 ? 0.0 : network.adjacency.maxCoeff();
    if (top == 0.0)
        return network;
    return StructuralNetwork{network.adjacency / top};
}

Mat normalize_structural(const StructuralNetwork& network) {
    check_structural(network.adjacency, "normalize_structural");
    return normalize_symmetric(network.adjacency);
}

EffectiveSeries build_effective(const BoldSeries& bold, Eigen::Index segments, double beta) {
    if (!bold.values.allFinite())
        throw std::invalid_argument("build_effective: subject " + bold.subject_id + " has non-finite samples");
    return rescale_effective(effective_adjacency(segment_means(bold.values, segments), beta));
}

} // namespace steode::effconn
