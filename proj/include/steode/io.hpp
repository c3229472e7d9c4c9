// io.hpp - on-disk formats.
//
// Matrices: headerless CSV, one row per node, shortest round-trip decimal.
// Manifest, config, reports and models: JSON.

#ifndef STEODE_IO_HPP
#define STEODE_IO_HPP

#include "steode/trainer.hpp"
#include "steode/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace steode::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Parse/validation failure; the message carries file and line where known.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Mat read_matrix_csv(const fs::path& path);
void write_matrix_csv(const fs::path& path, const Mat& m);
std::string format_double(double v);

struct SubjectEntry {
    std::string id;
    std::string bold;       // relative to the manifest root
    std::string structural; // relative to the manifest root
    double label = 0.0;
};

struct CohortManifest {
    fs::path root;
    TaskKind task = TaskKind::classification;
    std::vector<std::string> class_names;
    std::string target_name;
    std::vector<SubjectEntry> subjects;

    Task task_spec() const;
};

CohortManifest load_manifest(const fs::path& path);
void save_manifest(const fs::path& path, const CohortManifest& manifest);

/// Loads bold and structural matrices and checks N/b consistency across subjects.
struct RawSubject {
    BoldSeries bold;
    StructuralNetwork structural;
    Label label;
};
std::vector<RawSubject> load_subjects(const CohortManifest& manifest);

fs::path effective_dir(const CohortManifest& manifest);
fs::path effective_file(const CohortManifest& manifest, const std::string& id, std::size_t t);
void write_effective(const CohortManifest& manifest, const std::string& id, const EffectiveSeries& series);
void write_effective_meta(const CohortManifest& manifest, int segments, double beta);

/// Previously built series, or nullopt when absent or built with other settings.
std::optional<std::vector<EffectiveSeries>> read_effective(const CohortManifest& manifest, int segments,
                                                          double beta);

Json to_json(const Mat& m);
Mat matrix_from_json(const Json& j, const std::string& field);

Json to_json(const trainer::TrainConfig& cfg);
/// Applies any fields present in `j` over `cfg`; unknown keys are errors.
trainer::TrainConfig config_from_json(const Json& j, trainer::TrainConfig cfg = {});

Json to_json(const trainer::TrainReport& report);
Json to_json(const model::ModelParams& params);
model::ModelParams params_from_json(const Json& j);

struct ModelFile {
    trainer::TrainConfig config;
    Mat features;
    std::vector<model::ModelParams> folds;
};
void save_model(const fs::path& path, const ModelFile& model);
ModelFile load_model(const fs::path& path);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);

} // namespace steode::io

#endif // STEODE_IO_HPP
