#include "tissueseg/volume.hpp"

#include <algorithm>

#include "tissueseg/errors.hpp"

namespace tseg {

std::string_view to_string(Modality m)
{
    switch (m) {
    case Modality::T1w: return "T1w";
    case Modality::T2w: return "T2w";
    case Modality::Synthetic: return "synthetic";
    }
    return "synthetic";
}

Modality modality_from_string(std::string_view s)
{
    if (s == "T1w") return Modality::T1w;
    if (s == "T2w") return Modality::T2w;
    if (s == "synthetic") return Modality::Synthetic;
    throw std::invalid_argument("unknown modality tag '" + std::string(s) + "'");
}

std::string_view to_string(Tissue t)
{
    switch (t) {
    case Tissue::Background: return "background";
    case Tissue::CSF: return "CSF";
    case Tissue::GM: return "GM";
    case Tissue::WM: return "WM";
    }
    return "?";
}

Volume::Volume(Grid3<float> data, std::array<double, 3> spacing, Modality modality)
    : data_(std::move(data)), spacing_(spacing), modality_(modality)
{
    for (int a = 0; a < 3; ++a) {
        if (data_.dims()[a] < 1)
            throw ShapeError("volume dimensions must be >= 1, got " + to_string(data_.dims()));
        if (!(spacing_[a] > 0.0))
            throw std::invalid_argument("voxel spacing must be strictly positive");
    }
}

LabelMap::LabelMap(Grid3<std::uint8_t> labels) : labels_(std::move(labels))
{
    auto bad = std::find_if(labels_.values().begin(), labels_.values().end(),
                            [](std::uint8_t v) { return v >= kNumClasses; });
    if (bad != labels_.values().end())
        throw InvalidLabelError("label value " + std::to_string(int(*bad)) +
                                " outside {0,1,2,3}");
}

Case::Case(std::string case_id, std::vector<Volume> volumes, std::optional<LabelMap> ground_truth,
           MaskGrid brain_mask)
    : case_id_(std::move(case_id)), volumes_(std::move(volumes)),
      ground_truth_(std::move(ground_truth)), brain_mask_(std::move(brain_mask))
{
    const Vec3i& d = brain_mask_.dims();
    for (std::size_t i = 0; i < volumes_.size(); ++i)
        if (volumes_[i].dims() != d)
            throw DimensionMismatchError("case '" + case_id_ + "': modality " + std::to_string(i) +
                                         " is " + to_string(volumes_[i].dims()) + ", mask is " +
                                         to_string(d));
    if (ground_truth_ && ground_truth_->dims() != d)
        throw DimensionMismatchError("case '" + case_id_ + "': ground truth is " +
                                     to_string(ground_truth_->dims()) + ", mask is " + to_string(d));
    if (std::none_of(brain_mask_.values().begin(), brain_mask_.values().end(),
                     [](std::uint8_t v) { return v != 0; }))
        throw DegenerateInputError("case '" + case_id_ + "': brain mask is empty");
}

Case Case::select_modalities(const std::vector<int>& channels) const
{
    std::vector<Volume> picked;
    for (int c : channels) {
        if (c < 0 || std::size_t(c) >= volumes_.size())
            throw std::out_of_range("modality channel " + std::to_string(c) + " not present");
        picked.push_back(volumes_[std::size_t(c)]);
    }
    return Case(case_id_, std::move(picked), ground_truth_, brain_mask_);
}

} // namespace tseg
