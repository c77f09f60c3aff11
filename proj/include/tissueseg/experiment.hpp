#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tissueseg/architecture.hpp"
#include "tissueseg/case_io.hpp"
#include "tissueseg/sampling.hpp"
#include "tissueseg/trainer.hpp"
#include "tissueseg/wilcoxon.hpp"

namespace tseg {

enum class Study { Overlap, Modality, Dimensionality, SingleRun };
std::string_view to_string(Study s);
Study study_from_string(std::string_view s);

/// Which side of the pipeline the overlap study varies.
enum class OverlapVary { Both, Train, Test };

struct PhantomDataset {
    int count = 4;
    Vec3i dims{64, 64, 64};
    double noise_sigma = 0.0;
    int modalities = 1;
    std::uint64_t seed = 1; ///< phantom i uses seed + i
};

struct FileDataset {
    std::vector<CaseFiles> cases;
    std::optional<std::filesystem::path> label_mapping;
};

struct PatchOverride {
    std::optional<Vec3i> output_size; ///< 2D specs get z = 1
    std::optional<double> width_scale;
};

struct ExperimentConfig {
    Study study = Study::SingleRun;
    std::vector<Family> families{Family::UNet};
    std::vector<Dimensionality> dims{Dimensionality::D3};
    OverlapLevel overlap_train = OverlapLevel::High;
    OverlapLevel overlap_test = OverlapLevel::High;
    OverlapVary overlap_vary = OverlapVary::Both;
    std::optional<PhantomDataset> phantom;
    std::optional<FileDataset> files;
    bool loocv = true;
    double test_fraction = 0.25; ///< fixed-split evaluation only
    TrainConfig train;
    double width_scale = 1.0;
    std::map<Family, PatchOverride> patch_overrides;
    Sided sided = Sided::TwoSided;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::filesystem::path output_dir = "results";
};

/// Parses and checks a config document. Relative dataset paths resolve
/// against `base_dir`. Throws ConfigError naming the offending key.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// Cross-field checks that need no data (study vs. modality count, ...).
void validate_experiment_config(const ExperimentConfig& c);

struct Setting {
    Family family = Family::UNet;
    Dimensionality dim = Dimensionality::D3;
    OverlapLevel overlap_train = OverlapLevel::High;
    OverlapLevel overlap_test = OverlapLevel::High;
    std::vector<int> channels; ///< modality indices fed to the network
    std::string group;         ///< settings in one group are compared pairwise

    std::string modalities_label(const std::vector<std::string>& tags) const;
    std::string label(const std::vector<std::string>& tags) const;
};

/// Expands the study into concrete settings, in report order.
std::vector<Setting> expand_settings(const ExperimentConfig& c, int modality_count);

struct MetricRow {
    std::string case_id;
    std::size_t setting = 0; ///< index into MetricsBundle::settings
    Tissue cls = Tissue::CSF;
    double dsc = 0.0;
};

struct Comparison {
    std::size_t a = 0, b = 0; ///< setting indices
    Tissue cls = Tissue::CSF;
    double mean_a = 0.0, mean_b = 0.0;
    SignificanceResult test;
    bool significant() const { return !test.too_few_pairs && test.p_value < kSignificanceLevel; }
};

struct MetricsBundle {
    ExperimentConfig config;
    std::vector<std::string> modality_tags;
    std::vector<Setting> settings;
    std::vector<MetricRow> rows;
    std::vector<Comparison> comparisons;
    std::map<std::string, nlohmann::json> provenance; ///< file stem -> document
};

/// Wilcoxon between every pair of settings in a group, per class, paired by
/// case id.
std::vector<Comparison> compare_settings(const std::vector<Setting>& settings, const std::vector<MetricRow>& rows,
                                         Sided sided);

using ProgressCallback = std::function<void(const std::string&)>;

/// Runs every setting over all folds. Identical configs give identical bundles.
MetricsBundle run_experiment(const ExperimentConfig& config, const ProgressCallback& progress = {});

/// Loads (file datasets) or generates (phantoms) the raw cases.
std::vector<Case> load_dataset(const ExperimentConfig& config);

/// Architecture for a setting, honouring width scale and per-family overrides.
ArchitectureSpec setting_spec(const ExperimentConfig& config, const Setting& s);

/// FNV-1a over a key string; used to derive per-run seeds.
std::uint64_t derive_seed(std::uint64_t base, const std::string& key);

} // namespace tseg
