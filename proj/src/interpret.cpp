#include "steode/interpret.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace steode::interpret {

EdgeRanking top_k_edges(const Mat& gamma, int k, bool include_diagonal) {
    if (k < 1)
        throw std::invalid_argument("top_k_edges: K must be at least 1");
    if (gamma.rows() != gamma.cols())
        throw std::invalid_argument("top_k_edges: gamma must be square");
    EdgeRanking ranking;
    ranking.requested = k;
    for (Eigen::Index i = 0; i < gamma.rows(); ++i)
        for (Eigen::Index j = 0; j < gamma.cols(); ++j)
            if (include_diagonal || i != j)
                ranking.edges.push_back({i, j, gamma(i, j), std::abs(gamma(i, j))});
    std::stable_sort(ranking.edges.begin(), ranking.edges.end(), [](const RankedEdge& a, const RankedEdge& b) {
        if (a.abs_gamma != b.abs_gamma)
            return a.abs_gamma > b.abs_gamma;
        if (a.source != b.source)
            return a.source < b.source;
        return a.target < b.target;
    });
    if (static_cast<std::size_t>(k) > ranking.edges.size())
        ranking.clamped = true;
    else
        ranking.edges.resize(static_cast<std::size_t>(k));
    return ranking;
}

std::vector<Mat> masked_dynamics(const Mat& gamma, const EffectiveSeries& series) {
    std::vector<Mat> out;
    out.reserve(series.length());
    for (const Mat& a : series.networks) {
        if (a.rows() != gamma.rows() || a.cols() != gamma.cols()) {
            std::ostringstream os;
            os << "masked_dynamics: gamma is " << gamma.rows() << "x" << gamma.cols() << " but network is "
               << a.rows() << "x" << a.cols();
            throw std::invalid_argument(os.str());
        }
        out.push_back(gamma.cwiseProduct(a));
    }
    return out;
}

std::map<int, std::vector<double>> mean_strength_curve(const Mat& gamma, std::span<const EffectiveSeries> series,
                                                       const EdgeRanking& ranking, std::span<const int> groups,
                                                       std::span<const int> wanted) {
    if (ranking.edges.empty())
        throw std::invalid_argument("mean_strength_curve: edge ranking is empty");
    if (series.size() != groups.size())
        throw std::invalid_argument("mean_strength_curve: one group label per subject required");
    std::map<int, std::vector<double>> curves;
    for (int g : wanted) {
        std::vector<double> acc;
        std::size_t members = 0;
        for (std::size_t s = 0; s < series.size(); ++s) {
            if (groups[s] != g)
                continue;
            const std::vector<Mat> masked = masked_dynamics(gamma, series[s]);
            if (members == 0)
                acc.assign(masked.size(), 0.0);
            else if (acc.size() != masked.size())
                throw std::invalid_argument("mean_strength_curve: subjects differ in series length");
            for (std::size_t t = 0; t < masked.size(); ++t) {
                double edge_sum = 0.0;
                for (const RankedEdge& e : ranking.edges)
                    edge_sum += masked[t](e.source, e.target);
                acc[t] += edge_sum / static_cast<double>(ranking.edges.size());
            }
            ++members;
        }
        if (members == 0)
            throw std::invalid_argument("mean_strength_curve: group " + std::to_string(g) + " has no subjects");
        for (double& v : acc)
            v /= static_cast<double>(members);
        curves.emplace(g, std::move(acc));
    }
    return curves;
}

std::map<int, std::vector<double>> mean_strength_curve(const Mat& gamma, std::span<const EffectiveSeries> series,
                                                       const EdgeRanking& ranking, std::span<const int> groups) {
    const std::set<int> distinct(groups.begin(), groups.end());
    const std::vector<int> wanted(distinct.begin(), distinct.end());
    return mean_strength_curve(gamma, series, ranking, groups, wanted);
}

} // namespace steode::interpret
