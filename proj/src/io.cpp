#include "steode/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace steode::io {

namespace {

[[noreturn]] void fail(const fs::path& path, std::size_t line, const std::string& msg) {
    std::ostringstream os;
    os << path.string();
    if (line > 0)
        os << ":" << line;
    os << ": " << msg;
    throw FormatError(os.str());
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Mat read_matrix_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        fail(path, 0, "cannot open file");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view body = trim(line);
        if (body.empty())
            continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= body.size()) {
            const auto comma = body.find(',', pos);
            const std::string_view cell = trim(body.substr(pos, comma == std::string_view::npos ? body.npos : comma - pos));
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                fail(path, lineno, "invalid number '" + std::string(cell) + "' in column " + std::to_string(row.size() + 1));
            if (!std::isfinite(v))
                fail(path, lineno, "non-finite value in column " + std::to_string(row.size() + 1));
            row.push_back(v);
            if (comma == std::string_view::npos)
                break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            fail(path, lineno,
                 "expected " + std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        fail(path, 0, "no data rows");
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_matrix_csv(const fs::path& path, const Mat& m) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(path, 0, "cannot open file for writing");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0)
                out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out)
        fail(path, 0, "write failed");
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        fail(path, 0, "cannot open file");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        fail(path, 0, e.what());
    }
}

void write_json(const fs::path& path, const Json& j) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(path, 0, "cannot open file for writing");
    out << j.dump(2) << '\n';
}

Task CohortManifest::task_spec() const {
    if (task == TaskKind::regression)
        return Task::regression();
    return Task::classification(static_cast<int>(class_names.size()));
}

CohortManifest load_manifest(const fs::path& path) {
    const Json j = read_json(path);
    auto need = [&](const Json& obj, const char* field, const std::string& where) -> const Json& {
        if (!obj.is_object() || !obj.contains(field))
            fail(path, 0, "missing field '" + std::string(field) + "'" + where);
        return obj.at(field);
    };
    CohortManifest m;
    m.root = path.parent_path();
    if (j.contains("root"))
        m.root = m.root / j.at("root").get<std::string>();
    const std::string task = need(j, "task", "").get<std::string>();
    if (task == "classification") {
        m.task = TaskKind::classification;
        m.class_names = need(j, "classes", "").get<std::vector<std::string>>();
        if (m.class_names.size() < 2)
            fail(path, 0, "field 'classes' must name at least two classes");
    } else if (task == "regression") {
        m.task = TaskKind::regression;
        m.target_name = j.value("target", std::string("target"));
    } else {
        fail(path, 0, "field 'task' must be 'classification' or 'regression', got '" + task + "'");
    }
    const Json& subjects = need(j, "subjects", "");
    if (!subjects.is_array() || subjects.empty())
        fail(path, 0, "field 'subjects' must be a nonempty array");
    std::set<std::string> seen;
    for (std::size_t k = 0; k < subjects.size(); ++k) {
        const Json& s = subjects[k];
        const std::string where = " in subjects[" + std::to_string(k) + "]";
        SubjectEntry e;
        e.id = need(s, "id", where).get<std::string>();
        e.bold = need(s, "bold", where).get<std::string>();
        e.structural = need(s, "structural", where).get<std::string>();
        const Json& label = need(s, "label", where);
        if (!label.is_number())
            fail(path, 0, "field 'label'" + where + " must be a number");
        e.label = label.get<double>();
        if (m.task == TaskKind::classification) {
            const auto c = static_cast<int>(e.label);
            if (static_cast<double>(c) != e.label || c < 0 || c >= static_cast<int>(m.class_names.size()))
                fail(path, 0, "field 'label'" + where + " is not a valid class index");
        }
        if (!seen.insert(e.id).second)
            fail(path, 0, "duplicate subject id '" + e.id + "'");
        m.subjects.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const fs::path& path, const CohortManifest& manifest) {
    Json j;
    j["task"] = manifest.task == TaskKind::classification ? "classification" : "regression";
    if (manifest.task == TaskKind::classification)
        j["classes"] = manifest.class_names;
    else
        j["target"] = manifest.target_name;
    Json subjects = Json::array();
    for (const SubjectEntry& e : manifest.subjects) {
        Json s;
        s["id"] = e.id;
        s["bold"] = e.bold;
        s["structural"] = e.structural;
        if (manifest.task == TaskKind::classification)
            s["label"] = static_cast<int>(e.label);
        else
            s["label"] = e.label;
        subjects.push_back(std::move(s));
    }
    j["subjects"] = std::move(subjects);
    write_json(path, j);
}

std::vector<RawSubject> load_subjects(const CohortManifest& manifest) {
    std::vector<RawSubject> out;
    out.reserve(manifest.subjects.size());
    for (const SubjectEntry& e : manifest.subjects) {
        const fs::path bold_path = manifest.root / e.bold;
        const fs::path struct_path = manifest.root / e.structural;
        RawSubject s{BoldSeries{e.id, read_matrix_csv(bold_path)}, StructuralNetwork{read_matrix_csv(struct_path)},
                     Label{e.label}};
        const Mat& a = s.structural.adjacency;
        if (a.rows() != a.cols())
            fail(struct_path, 0, "structural matrix must be square");
        if (a.rows() != s.bold.values.rows())
            fail(struct_path, 0, "structural matrix has " + std::to_string(a.rows()) + " nodes but bold has " +
                                     std::to_string(s.bold.values.rows()));
        if (a != a.transpose())
            fail(struct_path, 0, "structural matrix is not symmetric");
        if ((a.array() < 0.0).any())
            fail(struct_path, 0, "structural matrix has negative entries");
        if (!out.empty()) {
            const Mat& ref = out.front().bold.values;
            if (ref.rows() != s.bold.values.rows() || ref.cols() != s.bold.values.cols())
                fail(bold_path, 0, "shape differs from first subject");
        }
        out.push_back(std::move(s));
    }
    return out;
}

fs::path effective_dir(const CohortManifest& manifest) { return manifest.root / "effective"; }

fs::path effective_file(const CohortManifest& manifest, const std::string& id, std::size_t t) {
    return effective_dir(manifest) / (id + "_t" + std::to_string(t + 1) + ".csv");
}

void write_effective(const CohortManifest& manifest, const std::string& id, const EffectiveSeries& series) {
    for (std::size_t t = 0; t < series.networks.size(); ++t)
        write_matrix_csv(effective_file(manifest, id, t), series.networks[t]);
}

void write_effective_meta(const CohortManifest& manifest, int segments, double beta) {
    Json j;
    j["segments"] = segments;
    j["networks_per_subject"] = segments - 1;
    j["beta"] = beta;
    j["subjects"] = manifest.subjects.size();
    write_json(effective_dir(manifest) / "meta.json", j);
}

std::optional<std::vector<EffectiveSeries>> read_effective(const CohortManifest& manifest, int segments,
                                                          double beta) {
    const fs::path meta_path = effective_dir(manifest) / "meta.json";
    if (!fs::exists(meta_path))
        return std::nullopt;
    const Json meta = read_json(meta_path);
    if (meta.value("segments", -1) != segments || meta.value("beta", -1.0) != beta)
        return std::nullopt;
    std::vector<EffectiveSeries> out;
    for (const SubjectEntry& e : manifest.subjects) {
        EffectiveSeries s;
        s.beta = beta;
        for (int t = 0; t + 1 < segments; ++t) {
            const fs::path p = effective_file(manifest, e.id, static_cast<std::size_t>(t));
            if (!fs::exists(p))
                return std::nullopt;
            s.networks.push_back(read_matrix_csv(p));
        }
        out.push_back(std::move(s));
    }
    return out;
}

Json to_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const Json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j.front().is_array() || j.front().empty())
        throw FormatError("matrix field '" + field + "' must be a nonempty array of rows");
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != j.front().size())
            throw FormatError("matrix field '" + field + "' has ragged rows");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return m;
}

Json to_json(const trainer::TrainConfig& cfg) {
    Json j;
    j["lr0"] = cfg.lr0;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["batch_size"] = cfg.batch_size;
    j["weight_decay"] = cfg.weight_decay;
    j["decay_gamma"] = cfg.decay_gamma;
    j["beta"] = cfg.beta_dcm;
    j["lambda"] = cfg.lambda;
    j["segments"] = cfg.segments;
    j["seed"] = cfg.seed;
    j["task"] = cfg.task.kind == TaskKind::classification ? "classification" : "regression";
    j["outputs"] = cfg.task.outputs;
    j["folds"] = cfg.folds;
    j["feature_dim"] = cfg.feature_dim;
    j["embed_dim"] = cfg.embed_dim;
    j["hidden_dim"] = cfg.hidden_dim;
    return j;
}

trainer::TrainConfig config_from_json(const Json& j, trainer::TrainConfig cfg) {
    if (!j.is_object())
        throw FormatError("config must be a JSON object");
    std::vector<std::string> errors;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "lr0") cfg.lr0 = value.get<double>();
            else if (key == "max_epochs") cfg.max_epochs = value.get<int>();
            else if (key == "patience") cfg.patience = value.get<int>();
            else if (key == "batch_size") cfg.batch_size = value.get<int>();
            else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
            else if (key == "decay_gamma") cfg.decay_gamma = value.get<bool>();
            else if (key == "beta") cfg.beta_dcm = value.get<double>();
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "segments") cfg.segments = value.get<int>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "task") {
                const auto kind = value.get<std::string>();
                if (kind == "classification")
                    cfg.task.kind = TaskKind::classification;
                else if (kind == "regression")
                    cfg.task = Task::regression();
                else
                    errors.push_back("task: expected 'classification' or 'regression'");
            }
            else if (key == "outputs") cfg.task.outputs = value.get<int>();
            else if (key == "folds") cfg.folds = value.get<int>();
            else if (key == "feature_dim") cfg.feature_dim = value.get<int>();
            else if (key == "embed_dim") cfg.embed_dim = value.get<int>();
            else if (key == "hidden_dim") cfg.hidden_dim = value.get<int>();
            else errors.push_back(key + ": unknown config field");
        } catch (const nlohmann::json::exception&) {
            errors.push_back(key + ": wrong value type");
        }
    }
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors)
            msg += "\n  " + e;
        throw FormatError(msg);
    }
    return cfg;
}

namespace {

Json metrics_json(const trainer::Metrics& m) {
    Json j = Json::object();
    if (m.accuracy)
        j["accuracy"] = *m.accuracy;
    if (m.f1)
        j["f1"] = *m.f1;
    if (m.mae)
        j["mae"] = *m.mae;
    return j;
}

} // namespace

Json to_json(const trainer::TrainReport& report) {
    Json j;
    Json folds = Json::array();
    for (const trainer::FoldReport& f : report.folds) {
        Json fj;
        fj["fold"] = f.fold;
        fj["stop_epoch"] = f.stop_epoch;
        fj["best_epoch"] = f.best_epoch;
        fj["train_metrics"] = metrics_json(f.train_metrics);
        fj["val_metrics"] = metrics_json(f.val_metrics);
        fj["train_loss"] = f.train_loss;
        fj["val_loss"] = f.val_loss;
        folds.push_back(std::move(fj));
    }
    j["folds"] = std::move(folds);
    Json summary = Json::object();
    auto put = [&](const char* name, const std::optional<trainer::Summary>& s) {
        if (s)
            summary[name] = Json{{"mean", s->mean}, {"std", s->std}};
    };
    put("accuracy", report.accuracy);
    put("f1", report.f1);
    put("mae", report.mae);
    put("train_accuracy", report.train_accuracy);
    j["summary"] = std::move(summary);
    return j;
}

Json to_json(const model::ModelParams& params) {
    Json j;
    j["lambda"] = params.lambda;
    j["W"] = to_json(params.W);
    j["gamma"] = to_json(params.gamma);
    j["mlp"] = Json{{"W1", to_json(params.mlp.W1)},
                    {"b1", to_json(params.mlp.b1)},
                    {"W2", to_json(params.mlp.W2)},
                    {"b2", to_json(params.mlp.b2)}};
    return j;
}

model::ModelParams params_from_json(const Json& j) {
    model::ModelParams p;
    p.lambda = j.at("lambda").get<double>();
    p.W = matrix_from_json(j.at("W"), "W");
    p.gamma = matrix_from_json(j.at("gamma"), "gamma");
    const Json& mlp = j.at("mlp");
    p.mlp.W1 = matrix_from_json(mlp.at("W1"), "mlp.W1");
    p.mlp.b1 = matrix_from_json(mlp.at("b1"), "mlp.b1");
    p.mlp.W2 = matrix_from_json(mlp.at("W2"), "mlp.W2");
    p.mlp.b2 = matrix_from_json(mlp.at("b2"), "mlp.b2");
    return p;
}

void save_model(const fs::path& path, const ModelFile& model) {
    Json j;
    j["config"] = to_json(model.config);
    j["features"] = to_json(model.features);
    Json folds = Json::array();
    for (const auto& p : model.folds)
        folds.push_back(to_json(p));
    j["folds"] = std::move(folds);
    write_json(path, j);
}

ModelFile load_model(const fs::path& path) {
    const Json j = read_json(path);
    try {
        ModelFile m;
        m.config = config_from_json(j.at("config"));
        m.features = matrix_from_json(j.at("features"), "features");
        for (const Json& f : j.at("folds"))
            m.folds.push_back(params_from_json(f));
        if (m.folds.empty())
            fail(path, 0, "model holds no fold parameters");
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(path, 0, e.what());
    }
}

} // namespace steode::io
