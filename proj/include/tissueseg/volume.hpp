#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tissueseg/grid.hpp"

namespace tseg {

enum class Modality { T1w, T2w, Synthetic };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

/// Tissue classes. Label maps store these values directly.
enum class Tissue : std::uint8_t { Background = 0, CSF = 1, GM = 2, WM = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<Tissue, 3> kTissues{Tissue::CSF, Tissue::GM, Tissue::WM};

std::string_view to_string(Tissue t);

/// Scalar intensity grid with voxel spacing in mm.
class Volume {
public:
    Volume() = default;
    Volume(Grid3<float> data, std::array<double, 3> spacing, Modality modality);

    const Grid3<float>& data() const { return data_; }
    const Vec3i& dims() const { return data_.dims(); }
    const std::array<double, 3>& spacing() const { return spacing_; }
    Modality modality() const { return modality_; }

    bool operator==(const Volume&) const = default;

private:
    Grid3<float> data_;
    std::array<double, 3> spacing_{1.0, 1.0, 1.0};
    Modality modality_ = Modality::Synthetic;
};

/// Integer label grid restricted to {0,1,2,3}.
class LabelMap {
public:
    LabelMap() = default;
    /// Throws InvalidLabelError when a voxel is outside the class set.
    explicit LabelMap(Grid3<std::uint8_t> labels);

    const Grid3<std::uint8_t>& labels() const { return labels_; }
    const Vec3i& dims() const { return labels_.dims(); }
    std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
    std::size_t size() const { return labels_.size(); }

    bool operator==(const LabelMap&) const = default;

private:
    Grid3<std::uint8_t> labels_;
};

/// One subject: modality volumes, optional ground truth and a brain mask.
/// Immutable once constructed.
class Case {
public:
    /// Validates shapes (DimensionMismatchError) and mask content
    /// (DegenerateInputError when empty).
    Case(std::string case_id, std::vector<Volume> volumes, std::optional<LabelMap> ground_truth,
         MaskGrid brain_mask);

    const std::string& case_id() const { return case_id_; }
    const std::vector<Volume>& volumes() const { return volumes_; }
    const std::optional<LabelMap>& ground_truth() const { return ground_truth_; }
    const MaskGrid& brain_mask() const { return brain_mask_; }
    const Vec3i& dims() const { return brain_mask_.dims(); }
    std::size_t modality_count() const { return volumes_.size(); }

    /// Same case with only the listed modality channels, in the listed order.
    Case select_modalities(const std::vector<int>& channels) const;

    bool operator==(const Case&) const = default;

private:
    std::string case_id_;
    std::vector<Volume> volumes_;
    std::optional<LabelMap> ground_truth_;
    MaskGrid brain_mask_;
};

} // namespace tseg
