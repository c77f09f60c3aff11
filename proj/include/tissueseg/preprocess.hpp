#pragma once

#include <vector>

#include "tissueseg/volume.hpp"

namespace tseg {

/// Channel-major stack of equally sized grids (early fusion input).
struct ChannelStack {
    Vec3i dims{0, 0, 0};
    int channels = 0;
    std::vector<float> data; ///< [channel][z][y][x]

    const float* channel(int c) const { return data.data() + std::size_t(c) * voxel_count(dims); }
};

/// Zero mean / unit population variance over mask-foreground voxels;
/// background voxels are set to 0. Throws DegenerateInputError when the mask
/// has fewer than two voxels or the masked intensities are constant.
Volume normalize_intensity(const Volume& volume, const MaskGrid& mask);

/// Normalizes every modality of the case with its own brain mask.
Case preprocess_case(const Case& c);

/// Stacks the case modalities as channels, in input order.
ChannelStack stack_modalities(const Case& c);

} // namespace tseg
