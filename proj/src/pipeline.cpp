#include "steode/pipeline.hpp"

#include "steode/effconn.hpp"
#include "steode/model.hpp"

#include <stdexcept>

namespace steode::pipeline {

std::uint64_t feature_seed(std::uint64_t run_seed) { return run_seed ^ 0xa0761d6478bd642fULL; }

PreparedCohort prepare(const std::vector<io::RawSubject>& raw, const trainer::TrainConfig& cfg, const Task& task,
                       std::optional<std::vector<EffectiveSeries>> effective) {
    if (raw.empty())
        throw std::invalid_argument("prepare: empty cohort");
    if (effective && effective->size() != raw.size())
        throw std::invalid_argument("prepare: prebuilt effective series do not match the cohort size");
    PreparedCohort out;
    out.data.task = task;
    const Eigen::Index nodes = raw.front().structural.adjacency.rows();
    out.data.features = model::gaussian_features(nodes, cfg.feature_dim, feature_seed(cfg.seed));
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const io::RawSubject& s = raw[k];
        EffectiveSeries series = effective ? (*effective)[k]
                                           : effconn::build_effective(s.bold, cfg.segments, cfg.beta_dcm);
        SubjectGraphs graphs;
        graphs.structural = effconn::normalize_structural(effconn::rescale_structural(s.structural));
        for (const Mat& a : series.networks)
            graphs.effective.push_back(effconn::normalize_directed(a));
        out.data.subjects.push_back(std::move(graphs));
        out.data.labels.push_back(s.label);
        out.effective.push_back(std::move(series));
        out.ids.push_back(s.bold.subject_id);
    }
    return out;
}

std::vector<io::RawSubject> raw_subjects(const synth::SynthCohort& cohort) {
    std::vector<io::RawSubject> out;
    out.reserve(cohort.subjects.size());
    for (const synth::SynthSubject& s : cohort.subjects)
        out.push_back(io::RawSubject{BoldSeries{s.id, s.bold}, StructuralNetwork{s.structural},
                                     Label{static_cast<double>(s.label)}});
    return out;
}

} // namespace steode::pipeline
