// synth.hpp - synthetic cohorts with planted directed causal edges.
//
// Each subject's signal follows the forward-Euler form of dB/dt = alpha A B:
//   B(:, t+1) = B(:, t) + alpha_dt * A^T B(:, t) + noise
// where A is a shared sparse background plus the subject's class edges at
// strength `effect`. The structural network is the symmetrized support of
// all planted edges plus a shared random symmetric background.

#ifndef STEODE_SYNTH_HPP
#define STEODE_SYNTH_HPP

#include "steode/io.hpp"
#include "steode/types.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace steode::synth {

using Edge = std::pair<int, int>; // (source, target)

struct SynthSpec {
    int n_subjects = 80;
    int nodes = 20;
    int timepoints = 60;
    int classes = 2;
    /// Planted edges per class. Empty means: draw `edges_per_class` edges per
    /// class with pairwise-distinct node pairs.
    std::vector<std::vector<Edge>> planted;
    int edges_per_class = 4;
    /// Drawn edges come in (i,j),(j,i) pairs; edges_per_class must be even.
    bool reciprocal = true;
    double effect = 0.01;          // delta
    double noise = 0.01;           // sigma_n
    double alpha_dt = 1.0;
    double baseline = 1.0;         // initial signal level
    double initial_jitter = 0.05;
    double background_scale = 0.002;
    double background_density = 0.1;
    double structural_density = 0.02;
    std::uint64_t seed = 0;

    /// Every violated constraint.
    std::vector<std::string> validate() const;
};

struct SynthSubject {
    std::string id;
    int label = 0;
    Mat bold;       // N x b
    Mat structural; // N x N symmetric, zero diagonal, entries in [0,1]
};

struct SynthCohort {
    SynthSpec spec;              // with planted edges resolved
    std::vector<SynthSubject> subjects;

    /// Union of planted edges across classes, sorted.
    std::vector<Edge> discriminative_edges() const;
};

SynthCohort simulate(SynthSpec spec);

/// Writes manifest.json, bold/ and structural/ CSVs, planted_edges.csv.
io::CohortManifest write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir);

} // namespace steode::synth

#endif // STEODE_SYNTH_HPP
