// pipeline.hpp - raw cohort -> model-ready dataset.

#ifndef STEODE_PIPELINE_HPP
#define STEODE_PIPELINE_HPP

#include "steode/io.hpp"
#include "steode/synth.hpp"
#include "steode/trainer.hpp"

#include <optional>
#include <vector>

namespace steode::pipeline {

struct PreparedCohort {
    trainer::Dataset data;
    std::vector<EffectiveSeries> effective; // rescaled, not degree-normalized
    std::vector<std::string> ids;
};

/// Seed stream used for the shared node features of a run.
std::uint64_t feature_seed(std::uint64_t run_seed);

/// Rescales and normalizes the structural networks and the effective series.
/// `effective` may carry prebuilt series; otherwise they are built from the
/// signals with cfg.segments and cfg.beta_dcm.
PreparedCohort prepare(const std::vector<io::RawSubject>& raw, const trainer::TrainConfig& cfg, const Task& task,
                       std::optional<std::vector<EffectiveSeries>> effective = std::nullopt);

std::vector<io::RawSubject> raw_subjects(const synth::SynthCohort& cohort);

} // namespace steode::pipeline

#endif // STEODE_PIPELINE_HPP
