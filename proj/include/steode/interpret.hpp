// interpret.hpp - edge-importance readout from a trained gamma mask.

#ifndef STEODE_INTERPRET_HPP
#define STEODE_INTERPRET_HPP

#include "steode/types.hpp"

#include <map>
#include <span>
#include <vector>

namespace steode::interpret {

struct RankedEdge {
    Eigen::Index source = 0;
    Eigen::Index target = 0;
    double gamma = 0.0;
    double abs_gamma = 0.0;

    bool operator==(const RankedEdge&) const = default;
};

struct EdgeRanking {
    std::vector<RankedEdge> edges;
    int requested = 0;
    bool clamped = false; // requested exceeded the number of candidate edges
};

/// Directed edges sorted by |gamma| descending, ties by (source, target).
/// The diagonal is skipped unless `include_diagonal`.
EdgeRanking top_k_edges(const Mat& gamma, int k, bool include_diagonal = false);

/// gamma (.) A(t) for every network of the series.
std::vector<Mat> masked_dynamics(const Mat& gamma, const EffectiveSeries& series);

/// Per group: for each timepoint, mean over the group's subjects and the
/// ranked edges of (gamma (.) A_subject(t)).
std::map<int, std::vector<double>> mean_strength_curve(const Mat& gamma, std::span<const EffectiveSeries> series,
                                                       const EdgeRanking& ranking, std::span<const int> groups,
                                                       std::span<const int> wanted);

/// Same, reporting every group that occurs in `groups`.
std::map<int, std::vector<double>> mean_strength_curve(const Mat& gamma, std::span<const EffectiveSeries> series,
                                                       const EdgeRanking& ranking, std::span<const int> groups);

} // namespace steode::interpret

#endif // STEODE_INTERPRET_HPP
