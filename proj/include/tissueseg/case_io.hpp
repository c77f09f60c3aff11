#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tissueseg/volume.hpp"

namespace tseg {

/// source label -> target label, applied to ground truth before validation.
using LabelMapping = std::map<int, int>;

/// Parses a plain-text table with one "source_label target_label" pair per
/// line. Blank lines and lines starting with '#' are ignored.
LabelMapping load_label_mapping(const std::filesystem::path& path);

struct CaseFiles {
    std::string case_id; ///< derived from the first modality file name when empty
    std::vector<std::filesystem::path> modalities;
    /// Tags per modality; when absent, a tag stored in the file header is used,
    /// falling back to Synthetic.
    std::vector<Modality> modality_tags;
    std::optional<std::filesystem::path> ground_truth;
    std::filesystem::path mask;
};

/// Loads and validates a case. Errors: IoError for unreadable files,
/// DimensionMismatchError naming the offending file, InvalidLabelError for
/// labels outside {0,1,2,3} after mapping.
Case load_case(const CaseFiles& files, const LabelMapping* mapping = nullptr);

/// Writes every grid of the case to `dir` as `<case_id>_<part>.nii.gz` and
/// returns the file set that reloads it.
CaseFiles save_case(const Case& c, const std::filesystem::path& dir);

void write_label_map(const std::filesystem::path& path, const LabelMap& labels,
                     const std::array<double, 3>& spacing = {1.0, 1.0, 1.0});
LabelMap read_label_map(const std::filesystem::path& path, const LabelMapping* mapping = nullptr);

} // namespace tseg
