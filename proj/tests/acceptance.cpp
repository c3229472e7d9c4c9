// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "cli_app.hpp"
#include "oracles.hpp"

#include "steode/effconn.hpp"
#include "steode/interpret.hpp"
#include "steode/io.hpp"
#include "steode/model.hpp"
#include "steode/pipeline.hpp"
#include "steode/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace steode;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << detail << std::endl;
    if (!pass)
        ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double regularized(const oracle::Instance& in, const model::ModelParams& p, double wd) {
    const double base = model::evaluate_subject(in.graphs, in.x, p, in.label, in.task).loss;
    return trainer::regularized_loss(base, p, wd);
}

double max_abs(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

// --- 1 -----------------------------------------------------------------

void gradient_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    const double wd = 1e-3;
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Task task = k % 2 ? Task::regression() : Task::classification(2);
        const auto in = oracle::random_instance(rng, 6, 4, 3, 5, 4, task);
        const auto eval = model::evaluate_subject(in.graphs, in.x, in.params, in.label, in.task);
        model::Gradients grads = eval.grads;
        trainer::regularized_loss(eval.loss, in.params, wd, false, &grads);
        for (model::Slot slot : model::kAllSlots) {
            const Mat num = oracle::finite_difference(
                [&](const model::ModelParams& p) { return regularized(in, p, wd); }, in.params, slot);
            // below ~1e-6 central differences at h=1e-5 are roundoff-limited
            worst = std::max(worst, oracle::max_relative_error(grads.at(slot), num, 1e-6));
        }
    }
    const double secs = seconds_since(t0);
    report(1, "gradient correctness", worst < 1e-5 && secs < 30.0,
           "max rel err " + fmt("%.2e", worst) + " over 20 instances, " + fmt("%.2f s", secs));
}

// --- 2 -----------------------------------------------------------------

void oracle_equivalence() {
    std::mt19937_64 rng(202);
    double eff = 0.0, dir = 0.0, sym = 0.0, emb = 0.0;
    for (int k = 0; k < 100; ++k) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 8);

        Mat means = oracle::random_matrix(n, 2 + static_cast<Eigen::Index>(rng() % 5), rng, -2.0, 2.0);
        if (k % 10 == 0)
            means(0, 0) = 0.0;
        const auto got = effconn::effective_adjacency(means, 0.5);
        const auto want = oracle::effective(means, 0.5);
        for (std::size_t t = 0; t < want.size(); ++t)
            eff = std::max(eff, max_abs(got.networks[t], want[t]));

        const Mat a = oracle::random_matrix(n, n, rng);
        dir = std::max(dir, max_abs(effconn::normalize_directed(a), oracle::normalize_directed(a)));

        const Mat s = oracle::random_structural(n, rng);
        sym = std::max(sym, max_abs(effconn::normalize_structural({s}), oracle::normalize_structural(s)));

        auto in = oracle::random_instance(rng, n, 1 + k % 4, 1 + k % 3, 3, 2, Task::classification(2));
        in.params.lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const Mat e = model::embed_layer(in.graphs.structural, in.graphs.effective[0], in.x, in.params);
        emb = std::max(emb, max_abs(e, oracle::embed(in.graphs.structural, in.graphs.effective[0], in.x,
                                                     in.params.W, in.params.gamma, in.params.lambda)));
    }
    const double worst = std::max({eff, dir, sym, emb});
    std::ostringstream os;
    os << "max abs err effective " << fmt("%.1e", eff) << ", directed " << fmt("%.1e", dir) << ", structural "
       << fmt("%.1e", sym) << ", embed " << fmt("%.1e", emb) << " (100 instances each)";
    report(2, "oracle equivalence", worst <= 1e-12, os.str());
}

// --- 3 -----------------------------------------------------------------

void telescoping() {
    std::mt19937_64 rng(303);
    int exact = 0;
    for (int k = 0; k < 50; ++k) {
        const int segments = 2 + k % 6;
        const auto in = oracle::random_instance(rng, 2 + k % 7, 3, 2, 3, segments, Task::classification(2));
        Mat sum = Mat::Zero(in.graphs.structural.rows(), 2);
        for (const auto& f : in.graphs.effective)
            sum += model::embed_layer(in.graphs.structural, f, in.x, in.params);
        exact += model::unroll(in.graphs.effective, in.graphs.structural, in.x, in.params) == sum;
    }
    report(3, "telescoping identity", exact == 50, std::to_string(exact) + "/50 bitwise equal");
}

// --- 4 -----------------------------------------------------------------

void transpose_invariance() {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    bool mix_exact = true;
    for (int k = 0; k < 20; ++k) {
        const Task task = k % 2 ? Task::regression() : Task::classification(3);
        const auto in = oracle::random_instance(rng, 6, 4, 3, 5, 5, task);
        auto flipped = in;
        for (auto& a : flipped.graphs.effective)
            a = Mat(a.transpose());
        const double l0 = model::evaluate_subject(in.graphs, in.x, in.params, in.label, task).loss;
        const double l1 = model::evaluate_subject(flipped.graphs, in.x, in.params, in.label, task).loss;
        worst = std::max(worst, std::fabs(l0 - l1));
        for (const auto& a : in.graphs.effective) {
            mix_exact = mix_exact && model::mix_directions(a, 0.0) == Mat(a.transpose());
            mix_exact = mix_exact && model::mix_directions(a, 1.0) == a;
        }
    }
    report(4, "lambda=0.5 transpose invariance", worst <= 1e-12 && mix_exact,
           "max loss diff " + fmt("%.1e", worst) + ", mix at 0/1 " + (mix_exact ? "exact" : "NOT exact"));
}

// --- 5 -----------------------------------------------------------------

void permutation_equivariance() {
    std::mt19937_64 rng(505);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Task task = k % 2 ? Task::regression() : Task::classification(2);
        auto in = oracle::random_instance(rng, 7, 4, 3, 5, 4, task);
        in.params.lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        std::vector<int> perm(7);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto p = in;
        p.graphs.structural = oracle::permute_both(in.graphs.structural, perm);
        for (auto& a : p.graphs.effective)
            a = oracle::permute_both(a, perm);
        p.x = oracle::permute_rows(in.x, perm);
        p.params.gamma = oracle::permute_both(in.params.gamma, perm);
        const double l0 = model::evaluate_subject(in.graphs, in.x, in.params, in.label, task).loss;
        const double l1 = model::evaluate_subject(p.graphs, p.x, p.params, p.label, task).loss;
        worst = std::max(worst, std::fabs(l0 - l1));
    }
    report(5, "permutation equivariance", worst <= 1e-10, "max loss diff " + fmt("%.1e", worst) + " over 20");
}

// --- 6, 7 --------------------------------------------------------------

// L2-regularized logistic regression on standardized flattened A^f, k-fold.
double probe_accuracy(const pipeline::PreparedCohort& prep, std::uint64_t seed) {
    const std::size_t n = prep.effective.size();
    const Eigen::Index nodes = prep.effective[0].nodes();
    const Eigen::Index p = nodes * nodes * static_cast<Eigen::Index>(prep.effective[0].length());
    Mat x(static_cast<Eigen::Index>(n), p);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        Eigen::Index col = 0;
        for (const auto& a : prep.effective[s].networks)
            for (Eigen::Index i = 0; i < a.size(); ++i)
                x(static_cast<Eigen::Index>(s), col++) = a.data()[i];
        y(static_cast<Eigen::Index>(s)) = prep.data.labels[s].value;
    }
    const auto folds = trainer::kfold_split(n, 5, seed);
    int correct = 0;
    for (const auto& held : folds) {
        std::set<std::size_t> out(held.begin(), held.end());
        std::vector<Eigen::Index> tr;
        for (std::size_t s = 0; s < n; ++s)
            if (!out.count(s))
                tr.push_back(static_cast<Eigen::Index>(s));
        Mat xt(static_cast<Eigen::Index>(tr.size()), p);
        Eigen::VectorXd yt(static_cast<Eigen::Index>(tr.size()));
        for (std::size_t r = 0; r < tr.size(); ++r) {
            xt.row(static_cast<Eigen::Index>(r)) = x.row(tr[r]);
            yt(static_cast<Eigen::Index>(r)) = y(tr[r]);
        }
        const Eigen::RowVectorXd mu = xt.colwise().mean();
        Eigen::RowVectorXd sd = ((xt.rowwise() - mu).array().square().colwise().mean()).sqrt();
        sd = sd.unaryExpr([](double v) { return v > 1e-12 ? v : 1.0; });
        const Mat z = (xt.rowwise() - mu).array().rowwise() / sd.array();
        const double m = static_cast<double>(tr.size());

        // step 1/L, L bounding the logistic Hessian
        Eigen::VectorXd v = Eigen::VectorXd::Ones(p).normalized();
        double top = 0.0;
        for (int it = 0; it < 50; ++it) {
            Eigen::VectorXd w = z.transpose() * (z * v) / m;
            top = w.norm();
            v = w / top;
        }
        const double reg = 1e-2;
        const double step = 1.0 / (0.25 * top + reg);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
        double b = 0.0;
        for (int it = 0; it < 2000; ++it) {
            const Eigen::VectorXd prob = (1.0 + (-((z * w).array() + b)).exp()).inverse().matrix();
            const Eigen::VectorXd r = prob - yt;
            w -= step * (z.transpose() * r / m + reg * w);
            b -= step * r.mean();
        }
        for (std::size_t s : held) {
            const Eigen::RowVectorXd zs = (x.row(static_cast<Eigen::Index>(s)) - mu).array() / sd.array();
            const double score = zs.dot(w) + b;
            correct += (score > 0.0 ? 1.0 : 0.0) == y(static_cast<Eigen::Index>(s));
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

std::set<std::pair<int, int>> read_planted(const fs::path& path) {
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    std::set<std::pair<int, int>> edges;
    while (std::getline(f, line)) {
        int c, i, j;
        if (std::sscanf(line.c_str(), "%d,%d,%d", &c, &i, &j) == 3)
            edges.insert({i, j});
    }
    return edges;
}

struct SeedRun {
    double probe = 0.0;
    double train_acc = 0.0;
    double held_acc = 0.0;
    int max_stop = 0;
    double recall = 0.0;
    double seconds = 0.0;
};

SeedRun run_seed(std::uint64_t seed, const fs::path& root) {
    const auto t0 = Clock::now();
    SeedRun out;
    const fs::path dir = root / ("seed" + std::to_string(seed));
    std::ostringstream so, se;
    const int code = cli::run({"--seed", std::to_string(seed), "gen-synth", "--out", dir.string(), "--subjects", "80",
                               "--nodes", "20", "--timepoints", "60", "--classes", "2", "--edges-per-class", "4"},
                              so, se);
    if (code != 0)
        throw std::runtime_error("gen-synth failed: " + se.str());

    const auto manifest = io::load_manifest(dir / "manifest.json");
    trainer::TrainConfig cfg;
    cfg.segments = 5;
    cfg.lambda = 0.5;
    cfg.beta_dcm = 0.5;
    cfg.max_epochs = 300;
    cfg.lr0 = 0.005;
    cfg.seed = seed;
    cfg.task = manifest.task_spec();
    const auto prep = pipeline::prepare(io::load_subjects(manifest), cfg, cfg.task);

    out.probe = probe_accuracy(prep, seed);
    const auto rep = trainer::cross_validate(prep.data, cfg);
    out.train_acc = rep.train_accuracy->mean;
    out.held_acc = rep.accuracy->mean;
    for (const auto& f : rep.folds)
        out.max_stop = std::max(out.max_stop, f.stop_epoch);

    Mat gamma = Mat::Zero(20, 20);
    for (const auto& f : rep.folds)
        gamma += f.params.gamma;
    gamma /= static_cast<double>(rep.folds.size());
    const auto planted = read_planted(dir / "planted_edges.csv");
    const auto ranking = interpret::top_k_edges(gamma, static_cast<int>(planted.size()));
    int hits = 0;
    for (const auto& e : ranking.edges)
        hits += planted.count({static_cast<int>(e.source), static_cast<int>(e.target)}) ? 1 : 0;
    out.recall = static_cast<double>(hits) / static_cast<double>(planted.size());
    out.seconds = seconds_since(t0);
    return out;
}

void synthetic_cohort() {
    const fs::path root = fs::temp_directory_path() / "steode_acceptance";
    fs::remove_all(root);
    std::vector<SeedRun> runs;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        runs.push_back(run_seed(seed, root));
        const auto& r = runs.back();
        std::cout << "  seed " << seed << ": probe " << fmt("%.3f", r.probe) << ", train " << fmt("%.3f", r.train_acc)
                  << ", held-out " << fmt("%.3f", r.held_acc) << ", last stop epoch " << r.max_stop << ", recall@8 "
                  << fmt("%.3f", r.recall) << ", " << fmt("%.1f s", r.seconds) << std::endl;
    }

    const SeedRun& c6 = runs.front();
    const bool calibrated = c6.probe >= 0.9;
    std::ostringstream os;
    os << "probe " << fmt("%.3f", c6.probe) << " (>= 0.9), train " << fmt("%.3f", c6.train_acc) << " (>= 0.95), held-out "
       << fmt("%.3f", c6.held_acc) << " (>= 0.8), stop <= " << c6.max_stop << " epochs, " << fmt("%.1f s", c6.seconds);
    report(6, "synthetic-cohort learning",
           calibrated && c6.train_acc >= 0.95 && c6.held_acc >= 0.8 && c6.max_stop <= 300 && c6.seconds < 600.0,
           os.str());

    double recall = 0.0;
    bool all_calibrated = true;
    for (const auto& r : runs) {
        recall += r.recall / static_cast<double>(runs.size());
        all_calibrated = all_calibrated && r.probe >= 0.9;
    }
    report(7, "interpretability recovery", recall >= 0.6 && all_calibrated,
           "mean top-8 recall " + fmt("%.3f", recall) + " over 5 seeds (>= 0.6)");
    fs::remove_all(root);
}

// --- 8 -----------------------------------------------------------------

trainer::Dataset small_dataset(std::uint64_t seed, const Task& task) {
    std::mt19937_64 rng(seed);
    trainer::Dataset d;
    d.task = task;
    d.features = oracle::random_matrix(4, 3, rng);
    for (int s = 0; s < 10; ++s) {
        auto in = oracle::random_instance(rng, 4, 3, 3, 5, 3, task);
        d.subjects.push_back(in.graphs);
        d.labels.push_back(Label{double(s % 2)});
    }
    return d;
}

void protocol_fidelity() {
    trainer::TrainConfig cfg;
    const bool lr_ok = trainer::lr_schedule(0, cfg) == cfg.lr0 && trainer::lr_schedule(cfg.max_epochs, cfg) == 0.0;

    // regression head whose output is b2 for every input: gamma = 0 and a
    // negative hidden bias give zero gradients everywhere
    auto flat = small_dataset(7, Task::regression());
    for (auto& l : flat.labels)
        l.value = 0.4;
    model::ModelParams p;
    p.W = Mat::Ones(3, 3);
    p.gamma = Mat::Zero(4, 4);
    p.mlp = {Mat::Ones(3, 5), Mat::Constant(1, 5, -1.0), Mat::Ones(5, 1), Mat::Constant(1, 1, 0.4)};
    trainer::TrainConfig c2;
    c2.task = Task::regression();
    c2.weight_decay = 0.0;
    c2.patience = 7;
    c2.max_epochs = 50;
    const std::vector<std::size_t> tr{0, 1, 2, 3, 4, 5, 6}, va{7, 8, 9};
    const auto fold = trainer::train_fold(flat, tr, va, c2, 0, p);
    const bool stop_ok = fold.stop_epoch == c2.patience + 1;

    const auto data = small_dataset(8, Task::classification(2));
    trainer::TrainConfig c3;
    c3.folds = 2;
    c3.max_epochs = 15;
    c3.patience = 5;
    c3.feature_dim = 3;
    c3.embed_dim = 3;
    c3.hidden_dim = 5;
    c3.seed = 42;
    const std::string a = io::to_json(trainer::cross_validate(data, c3)).dump();
    const std::string b = io::to_json(trainer::cross_validate(data, c3)).dump();

    std::ostringstream os;
    os << "lr(0)=lr0 and lr(max)=0 " << (lr_ok ? "exact" : "NOT exact") << ", constant loss stops at epoch "
       << fold.stop_epoch << " (patience " << c2.patience << "), repeat run " << (a == b ? "identical" : "DIFFERS");
    report(8, "training protocol fidelity", lr_ok && stop_ok && a == b, os.str());
}

// --- 9 -----------------------------------------------------------------

void default_constants() {
    std::vector<std::string> missing;
    const std::string train = cli::help_text("train");
    const std::string eff = cli::help_text("build-eff");
    const std::string sweep = cli::help_text("sweep-lambda");
    auto need = [&](const std::string& text, const std::string& what) {
        if (text.find(what) == std::string::npos)
            missing.push_back(what);
    };
    for (const char* s : {"--beta FLOAT [0.5]", "--segments INT [5]", "--feature-dim INT [16]",
                          "--batch-size INT [128]", "--lr0 FLOAT [0.001]", "--weight-decay FLOAT [1e-05]",
                          "--patience INT [100]", "--max-epochs INT [500]", "--folds INT [5]"})
        need(train, s);
    need(eff, "--beta FLOAT [0.5]");
    need(eff, "--segments INT [5]");
    need(sweep, "[0.1,0.3,0.5,0.7,0.9]");

    std::ostringstream so, se;
    cli::run({"train", "--dump-config"}, so, se);
    const auto j = io::Json::parse(so.str());
    const bool schema = j.at("beta") == 0.5 && j.at("segments") == 5 && j.at("feature_dim") == 16 &&
                        j.at("batch_size") == 128 && j.at("lr0") == 0.001 && j.at("weight_decay") == 1e-5 &&
                        j.at("patience") == 100 && j.at("max_epochs") == 500 && j.at("folds") == 5;
    std::ostringstream ss, se2;
    cli::run({"sweep-lambda", "--dump-config"}, ss, se2);
    const auto grid = io::Json::parse(ss.str()).at("lambda_grid").get<std::vector<double>>();
    const bool grid_ok = grid == std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9};

    // T=5 yields four networks
    const auto series = effconn::build_effective({"s", Mat::Ones(3, 60)}, trainer::TrainConfig{}.segments, 0.5);
    const bool four = series.length() == 4;

    std::string detail = missing.empty() ? "all defaults in --help" : "missing in --help:";
    for (const auto& m : missing)
        detail += " '" + m + "'";
    detail += schema ? ", config schema ok" : ", config schema MISMATCH";
    detail += grid_ok ? ", grid ok" : ", grid MISMATCH";
    detail += four ? ", T=5 -> 4 networks" : ", T=5 network count wrong";
    report(9, "default constants", missing.empty() && schema && grid_ok && four, detail);
}

} // namespace

int main() {
    const auto t0 = Clock::now();
    gradient_correctness();
    oracle_equivalence();
    telescoping();
    transpose_invariance();
    permutation_equivariance();
    synthetic_cohort();
    protocol_fidelity();
    default_constants();
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " ("
              << fmt("%.1f s", seconds_since(t0)) << ")" << std::endl;
    return failures == 0 ? 0 : 1;
}
