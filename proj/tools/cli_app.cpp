#include "cli_app.hpp"

#include "steode/effconn.hpp"
#include "steode/interpret.hpp"
#include "steode/io.hpp"
#include "steode/pipeline.hpp"
#include "steode/synth.hpp"
#include "steode/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

namespace steode::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;

class CliError : public std::runtime_error {
public:
    CliError(std::string msg, std::vector<std::string> details = {})
        : std::runtime_error(std::move(msg)), details(std::move(details)) {}
    std::vector<std::string> details;
};

const std::vector<double> kDefaultLambdaGrid = {0.1, 0.3, 0.5, 0.7, 0.9};

/// Flags that mirror TrainConfig. Values start at the defaults; only flags
/// given on the command line override the config file.
struct TrainFlags {
    trainer::TrainConfig values;
    std::string config_path;
    std::vector<std::pair<CLI::Option*, std::function<void(trainer::TrainConfig&)>>> setters;

    void attach(CLI::App& cmd, bool with_lambda) {
        auto add = [&](CLI::Option* opt, std::function<void(trainer::TrainConfig&)> set) {
            setters.emplace_back(opt, std::move(set));
        };
        auto& v = values;
        add(cmd.add_option("--lr0", v.lr0, "Initial learning rate"), [&v](auto& c) { c.lr0 = v.lr0; });
        add(cmd.add_option("--max-epochs", v.max_epochs, "Maximum training epochs"),
            [&v](auto& c) { c.max_epochs = v.max_epochs; });
        add(cmd.add_option("--patience", v.patience, "Epochs without validation improvement before stopping"),
            [&v](auto& c) { c.patience = v.patience; });
        add(cmd.add_option("--batch-size", v.batch_size, "Mini-batch size"),
            [&v](auto& c) { c.batch_size = v.batch_size; });
        add(cmd.add_option("--weight-decay", v.weight_decay, "L2 weight decay on W and MLP tensors"),
            [&v](auto& c) { c.weight_decay = v.weight_decay; });
        add(cmd.add_flag("--decay-gamma", v.decay_gamma, "Also apply weight decay to the gamma mask"),
            [&v](auto& c) { c.decay_gamma = v.decay_gamma; });
        add(cmd.add_option("--beta", v.beta_dcm, "Effective-connectivity scale beta in [0,1]"),
            [&v](auto& c) { c.beta_dcm = v.beta_dcm; });
        if (with_lambda)
            add(cmd.add_option("--lambda", v.lambda, "Direction-mixing weight in [0,1]"),
                [&v](auto& c) { c.lambda = v.lambda; });
        add(cmd.add_option("--segments", v.segments, "Time segments T (T-1 effective networks)"),
            [&v](auto& c) { c.segments = v.segments; });
        add(cmd.add_option("--folds", v.folds, "Cross-validation folds"), [&v](auto& c) { c.folds = v.folds; });
        add(cmd.add_option("--feature-dim", v.feature_dim, "Gaussian node feature width c"),
            [&v](auto& c) { c.feature_dim = v.feature_dim; });
        add(cmd.add_option("--embed-dim", v.embed_dim, "Embedding width d"),
            [&v](auto& c) { c.embed_dim = v.embed_dim; });
        add(cmd.add_option("--hidden-dim", v.hidden_dim, "MLP hidden width"),
            [&v](auto& c) { c.hidden_dim = v.hidden_dim; });
        cmd.add_option("--config", config_path, "JSON config file (flags given explicitly take precedence)");
    }

    trainer::TrainConfig resolve(std::uint64_t seed, const Task& task) const {
        trainer::TrainConfig cfg;
        if (!config_path.empty())
            cfg = io::config_from_json(io::read_json(config_path), cfg);
        for (const auto& [opt, set] : setters)
            if (opt->count() > 0)
                set(cfg);
        cfg.seed = seed;
        cfg.task = task;
        if (auto errors = cfg.validate(); !errors.empty())
            throw CliError("invalid configuration", std::move(errors));
        return cfg;
    }
};

struct Options {
    std::uint64_t seed = 0;

    // gen-synth
    std::string out_dir;
    synth::SynthSpec synth;

    // shared
    std::string manifest;

    // build-eff
    int segments = 5;
    double beta = 0.5;

    // train / sweep-lambda
    TrainFlags train;
    TrainFlags sweep;
    bool dump_config = false;
    std::vector<double> grid = kDefaultLambdaGrid;
    std::string out_file;

    // explain
    std::string model_path;
    int top_k = 400;
    int fold = -1;
    bool include_diagonal = false;
};

void configure(CLI::App& app, Options& o) {
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", o.seed, "Global random seed");

    CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic cohort with planted directed edges");
    gen->add_option("--out", o.out_dir, "Output directory")->required();
    gen->add_option("--subjects", o.synth.n_subjects, "Number of subjects (balanced across classes)");
    gen->add_option("--nodes", o.synth.nodes, "Nodes N");
    gen->add_option("--timepoints", o.synth.timepoints, "Timepoints b");
    gen->add_option("--classes", o.synth.classes, "Number of classes");
    gen->add_option("--edges-per-class", o.synth.edges_per_class, "Planted directed edges per class");
    gen->add_flag("--reciprocal,!--one-way", o.synth.reciprocal, "Plant edges as (i,j),(j,i) pairs");
    gen->add_option("--effect", o.synth.effect, "Planted edge strength delta");
    gen->add_option("--noise", o.synth.noise, "Per-step noise sigma");
    gen->add_option("--alpha-dt", o.synth.alpha_dt, "Coupling time step");
    gen->add_option("--background-scale", o.synth.background_scale, "Std of shared background coupling");
    gen->add_option("--background-density", o.synth.background_density, "Density of background coupling");
    gen->add_option("--structural-density", o.synth.structural_density, "Density of background structure");

    CLI::App* build = app.add_subcommand("build-eff", "Build effective networks for every subject of a manifest");
    build->add_option("--manifest", o.manifest, "Cohort manifest JSON")->required();
    build->add_option("--segments", o.segments, "Time segments T (writes T-1 networks per subject)");
    build->add_option("--beta", o.beta, "Effective-connectivity scale beta in [0,1]");

    CLI::App* train = app.add_subcommand("train", "Cross-validated training; writes report.json and model.json");
    train->add_option("--manifest", o.manifest, "Cohort manifest JSON");
    train->add_option("--out", o.out_dir, "Output directory");
    train->add_flag("--dump-config", o.dump_config, "Print the resolved config as JSON and exit");
    o.train.attach(*train, true);

    CLI::App* explain = app.add_subcommand("explain", "Edge ranking, masked dynamics and strength curves");
    explain->add_option("--model", o.model_path, "model.json written by train")->required();
    explain->add_option("--manifest", o.manifest, "Cohort manifest JSON")->required();
    explain->add_option("--top-k", o.top_k, "Number of edges to rank");
    explain->add_option("--fold", o.fold, "Fold whose gamma to use; -1 averages all folds");
    explain->add_flag("--include-diagonal", o.include_diagonal, "Rank self-edges too");
    explain->add_option("--out", o.out_dir, "Output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep-lambda", "Cross-validate once per lambda on a grid");
    sweep->add_option("--manifest", o.manifest, "Cohort manifest JSON");
    sweep->add_option("--grid", o.grid, "Lambda values")->delimiter(',');
    sweep->add_option("--out", o.out_file, "Write the JSON here instead of stdout");
    sweep->add_flag("--dump-config", o.dump_config, "Print the resolved config as JSON and exit");
    o.sweep.attach(*sweep, false);
}

void require_manifest(const Options& o) {
    if (o.manifest.empty())
        throw CliError("--manifest is required");
}

pipeline::PreparedCohort load_prepared(const io::CohortManifest& manifest, const trainer::TrainConfig& cfg) {
    auto raw = io::load_subjects(manifest);
    auto prebuilt = io::read_effective(manifest, cfg.segments, cfg.beta_dcm);
    return pipeline::prepare(raw, cfg, manifest.task_spec(), std::move(prebuilt));
}

Json summary_json(const trainer::TrainReport& r) { return io::to_json(r).at("summary"); }

int cmd_gen_synth(Options& o, std::ostream& out) {
    o.synth.seed = o.seed;
    if (auto errors = o.synth.validate(); !errors.empty())
        throw CliError("invalid synthetic cohort settings", std::move(errors));
    const synth::SynthCohort cohort = synth::simulate(o.synth);
    const auto manifest = synth::write_cohort(cohort, o.out_dir);
    Json j;
    j["manifest"] = (fs::path(o.out_dir) / "manifest.json").string();
    j["subjects"] = manifest.subjects.size();
    Json edges = Json::array();
    for (const auto& [i, k] : cohort.discriminative_edges())
        edges.push_back({i, k});
    j["planted_edges"] = std::move(edges);
    out << j.dump() << '\n';
    return 0;
}

int cmd_build_eff(const Options& o, std::ostream& out) {
    if (o.segments < 2)
        throw CliError("--segments must be at least 2");
    if (!(o.beta >= 0.0 && o.beta <= 1.0))
        throw CliError("--beta must lie in [0,1]");
    const auto manifest = io::load_manifest(o.manifest);
    const auto raw = io::load_subjects(manifest);
    for (const auto& s : raw)
        io::write_effective(manifest, s.bold.subject_id, effconn::build_effective(s.bold, o.segments, o.beta));
    io::write_effective_meta(manifest, o.segments, o.beta);
    Json j;
    j["directory"] = io::effective_dir(manifest).string();
    j["subjects"] = raw.size();
    j["networks_per_subject"] = o.segments - 1;
    j["beta"] = o.beta;
    out << j.dump() << '\n';
    return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
    if (o.dump_config) {
        out << io::to_json(o.train.resolve(o.seed, trainer::TrainConfig{}.task)).dump(2) << '\n';
        return 0;
    }
    require_manifest(o);
    if (o.out_dir.empty())
        throw CliError("--out is required");
    const auto manifest = io::load_manifest(o.manifest);
    const trainer::TrainConfig cfg = o.train.resolve(o.seed, manifest.task_spec());
    const auto prepared = load_prepared(manifest, cfg);
    const trainer::TrainReport report = trainer::cross_validate(prepared.data, cfg);

    io::ModelFile model{cfg, prepared.data.features, {}};
    for (const auto& f : report.folds)
        model.folds.push_back(f.params);
    const fs::path dir(o.out_dir);
    io::save_model(dir / "model.json", model);
    Json rj = io::to_json(report);
    rj["config"] = io::to_json(cfg);
    io::write_json(dir / "report.json", rj);
    out << summary_json(report).dump() << '\n';
    return 0;
}

int cmd_explain(const Options& o, std::ostream& out) {
    if (o.top_k < 1)
        throw CliError("--top-k must be at least 1");
    const io::ModelFile model = io::load_model(o.model_path);
    if (o.fold < -1 || o.fold >= static_cast<int>(model.folds.size()))
        throw CliError("--fold must be -1 or a fold index below " + std::to_string(model.folds.size()));
    Mat gamma;
    if (o.fold >= 0) {
        gamma = model.folds[static_cast<std::size_t>(o.fold)].gamma;
    } else {
        gamma = Mat::Zero(model.folds.front().gamma.rows(), model.folds.front().gamma.cols());
        for (const auto& p : model.folds)
            gamma += p.gamma;
        gamma /= static_cast<double>(model.folds.size());
    }

    const auto manifest = io::load_manifest(o.manifest);
    const auto prepared = load_prepared(manifest, model.config);
    if (prepared.data.subjects.front().structural.rows() != gamma.rows())
        throw CliError("model node count does not match the cohort");

    const auto ranking = interpret::top_k_edges(gamma, o.top_k, o.include_diagonal);
    if (ranking.clamped)
        std::cerr << "warning: --top-k " << o.top_k << " exceeds the " << ranking.edges.size()
                  << " candidate edges; ranking all of them\n";

    const fs::path dir(o.out_dir);
    fs::create_directories(dir / "dynamics");
    {
        std::ofstream csv(dir / "edges.csv", std::ios::binary);
        csv << "source,target,gamma,abs_gamma\n";
        for (const auto& e : ranking.edges)
            csv << e.source << ',' << e.target << ',' << io::format_double(e.gamma) << ','
                << io::format_double(e.abs_gamma) << '\n';
    }
    for (std::size_t s = 0; s < prepared.effective.size(); ++s) {
        const auto masked = interpret::masked_dynamics(gamma, prepared.effective[s]);
        for (std::size_t t = 0; t < masked.size(); ++t)
            io::write_matrix_csv(dir / "dynamics" / (prepared.ids[s] + "_t" + std::to_string(t + 1) + ".csv"),
                                 masked[t]);
    }

    std::vector<int> groups;
    for (const Label& l : prepared.data.labels)
        groups.push_back(manifest.task == TaskKind::classification ? l.class_index() : 0);
    const auto curves = interpret::mean_strength_curve(gamma, prepared.effective, ranking, groups);
    Json cj;
    cj["edges"] = ranking.edges.size();
    cj["timepoints"] = prepared.effective.front().length();
    Json gj = Json::object();
    for (const auto& [g, curve] : curves) {
        const std::string name =
            manifest.task == TaskKind::classification ? manifest.class_names[static_cast<std::size_t>(g)] : "all";
        gj[name] = curve;
    }
    cj["groups"] = std::move(gj);
    io::write_json(dir / "curves.json", cj);

    Json j;
    j["edges"] = (dir / "edges.csv").string();
    j["curves"] = (dir / "curves.json").string();
    j["ranked"] = ranking.edges.size();
    out << j.dump() << '\n';
    return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
    if (o.grid.empty())
        throw CliError("--grid must not be empty");
    std::vector<std::string> bad;
    for (double l : o.grid)
        if (!(l >= 0.0 && l <= 1.0))
            bad.push_back("lambda " + io::format_double(l) + " outside [0,1]");
    if (!bad.empty())
        throw CliError("invalid lambda grid", std::move(bad));
    std::vector<double> grid = o.grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (o.dump_config) {
        Json j = io::to_json(o.sweep.resolve(o.seed, trainer::TrainConfig{}.task));
        j.erase("lambda");
        j["lambda_grid"] = grid;
        out << j.dump(2) << '\n';
        return 0;
    }
    require_manifest(o);

    const auto manifest = io::load_manifest(o.manifest);
    trainer::TrainConfig cfg = o.sweep.resolve(o.seed, manifest.task_spec());
    auto prepared = load_prepared(manifest, cfg);
    Json results = Json::array();
    for (double lambda : grid) {
        cfg.lambda = lambda;
        const auto report = trainer::cross_validate(prepared.data, cfg);
        Json r;
        r["lambda"] = lambda;
        r["metrics"] = summary_json(report);
        results.push_back(std::move(r));
    }
    Json j;
    j["config"] = io::to_json(cfg);
    j["config"].erase("lambda");
    j["results"] = std::move(results);
    if (o.out_file.empty())
        out << j.dump(2) << '\n';
    else
        io::write_json(o.out_file, j);
    return 0;
}

void report_error(std::ostream& err, const std::string& command, const std::string& message,
                  const std::vector<std::string>& details = {}) {
    Json j;
    j["error"] = message;
    if (!command.empty())
        j["command"] = command;
    if (!details.empty())
        j["details"] = details;
    err << j.dump() << '\n';
}

} // namespace

std::string help_text(const std::string& subcommand) {
    CLI::App app{"Spatio-temporal embedding of structural-effective brain networks", "steode"};
    Options o;
    configure(app, o);
    if (subcommand.empty())
        return app.help();
    return app.get_subcommand(subcommand)->help();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatio-temporal embedding of structural-effective brain networks", "steode"};
    Options o;
    configure(app, o);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    std::string command;
    try {
        app.parse(reversed);
        command = app.get_subcommands().front()->get_name();
        if (command == "gen-synth")
            return cmd_gen_synth(o, out);
        if (command == "build-eff")
            return cmd_build_eff(o, out);
        if (command == "train")
            return cmd_train(o, out);
        if (command == "explain")
            return cmd_explain(o, out);
        return cmd_sweep(o, out);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(err, command, e.what());
        return 2;
    } catch (const CliError& e) {
        report_error(err, command, e.what(), e.details);
        return 1;
    } catch (const std::exception& e) {
        report_error(err, command, e.what());
        return 1;
    }
}

} // namespace steode::cli
