#include "steode/synth.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace steode::synth {

std::vector<std::string> SynthSpec::validate() const {
    std::vector<std::string> errors;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok)
            errors.push_back(msg);
    };
    require(nodes >= 2, "nodes must be at least 2");
    require(timepoints >= 2, "timepoints must be at least 2");
    require(classes >= 2, "classes must be at least 2");
    require(n_subjects >= classes && n_subjects % std::max(classes, 1) == 0,
            "n_subjects must be a positive multiple of classes (balanced cohort)");
    require(effect >= 0.0, "effect must be non-negative");
    require(noise >= 0.0, "noise must be non-negative");
    require(background_density >= 0.0 && background_density <= 1.0, "background_density must lie in [0,1]");
    require(structural_density >= 0.0 && structural_density <= 1.0, "structural_density must lie in [0,1]");
    if (!planted.empty()) {
        require(static_cast<int>(planted.size()) == classes, "planted must list one edge set per class");
        for (const auto& set : planted)
            for (const auto& [i, j] : set)
                require(i >= 0 && j >= 0 && i < nodes && j < nodes && i != j,
                        "planted edge (" + std::to_string(i) + "," + std::to_string(j) + ") is invalid");
    } else {
        require(edges_per_class >= 0, "edges_per_class must be non-negative");
        require(!reciprocal || edges_per_class % 2 == 0, "reciprocal planting needs an even edges_per_class");
        const int pairs = reciprocal ? edges_per_class / 2 : edges_per_class;
        require(2 * pairs * classes <= nodes, "nodes too few for distinct planted endpoints");
    }
    return errors;
}

std::vector<Edge> SynthCohort::discriminative_edges() const {
    std::set<Edge> all;
    for (const auto& set : spec.planted)
        all.insert(set.begin(), set.end());
    return {all.begin(), all.end()};
}

namespace {

std::vector<std::vector<Edge>> draw_planted(const SynthSpec& spec, std::mt19937_64& rng) {
    std::vector<int> nodes(static_cast<std::size_t>(spec.nodes));
    std::iota(nodes.begin(), nodes.end(), 0);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::vector<std::vector<Edge>> planted(static_cast<std::size_t>(spec.classes));
    std::size_t pos = 0;
    for (auto& set : planted) {
        const int pairs = spec.reciprocal ? spec.edges_per_class / 2 : spec.edges_per_class;
        for (int e = 0; e < pairs; ++e) {
            set.emplace_back(nodes[pos], nodes[pos + 1]);
            if (spec.reciprocal)
                set.emplace_back(nodes[pos + 1], nodes[pos]);
            pos += 2;
        }
        std::sort(set.begin(), set.end());
    }
    return planted;
}

} // namespace

SynthCohort simulate(SynthSpec spec) {
    if (const auto errors = spec.validate(); !errors.empty())
        throw std::invalid_argument("synth: " + errors.front());

    std::mt19937_64 cohort_rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Index n = spec.nodes;

    if (spec.planted.empty())
        spec.planted = draw_planted(spec, cohort_rng);

    Mat background = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && unit(cohort_rng) < spec.background_density)
                background(i, j) = spec.background_scale * normal(cohort_rng);

    Mat support = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (unit(cohort_rng) < spec.structural_density)
                support(i, j) = support(j, i) = 1.0;
    for (const auto& set : spec.planted)
        for (const auto& [i, j] : set)
            support(i, j) = support(j, i) = 1.0;

    SynthCohort cohort;
    cohort.spec = spec;
    const int per_class = spec.n_subjects / spec.classes;
    for (int s = 0; s < spec.n_subjects; ++s) {
        std::mt19937_64 rng(spec.seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(s + 1)));
        SynthSubject subject;
        std::ostringstream id;
        id << "sub-" << std::setw(3) << std::setfill('0') << s;
        subject.id = id.str();
        subject.label = s / per_class;

        Mat a = background;
        for (const auto& [i, j] : spec.planted[static_cast<std::size_t>(subject.label)])
            a(i, j) += spec.effect;
        const Mat step = spec.alpha_dt * a.transpose();

        subject.bold.resize(n, spec.timepoints);
        for (Eigen::Index i = 0; i < n; ++i)
            subject.bold(i, 0) = spec.baseline + spec.initial_jitter * normal(rng);
        for (Eigen::Index t = 0; t + 1 < spec.timepoints; ++t) {
            Eigen::VectorXd next = subject.bold.col(t) + step * subject.bold.col(t);
            for (Eigen::Index i = 0; i < n; ++i)
                next(i) += spec.noise * normal(rng);
            subject.bold.col(t + 1) = next;
        }

        subject.structural = Mat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                if (support(i, j) != 0.0)
                    subject.structural(i, j) = subject.structural(j, i) = 0.5 + 0.5 * unit(rng);
        cohort.subjects.push_back(std::move(subject));
    }
    return cohort;
}

io::CohortManifest write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::CohortManifest manifest;
    manifest.root = dir;
    manifest.task = TaskKind::classification;
    for (int c = 0; c < cohort.spec.classes; ++c)
        manifest.class_names.push_back("class" + std::to_string(c));
    for (const SynthSubject& s : cohort.subjects) {
        io::SubjectEntry e;
        e.id = s.id;
        e.bold = "bold/" + s.id + ".csv";
        e.structural = "structural/" + s.id + ".csv";
        e.label = s.label;
        io::write_matrix_csv(dir / e.bold, s.bold);
        io::write_matrix_csv(dir / e.structural, s.structural);
        manifest.subjects.push_back(std::move(e));
    }
    io::save_manifest(dir / "manifest.json", manifest);

    std::ofstream edges(dir / "planted_edges.csv", std::ios::binary);
    edges << "class,source,target\n";
    for (std::size_t c = 0; c < cohort.spec.planted.size(); ++c)
        for (const auto& [i, j] : cohort.spec.planted[c])
            edges << c << ',' << i << ',' << j << '\n';
    return manifest;
}

} // namespace steode::synth
