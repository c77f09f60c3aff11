#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tissueseg/grid.hpp"

namespace tseg {

/// Spatial metadata carried between reads and writes so that outputs keep
/// the geometry of their inputs. Processing itself happens in voxel space.
struct NiftiGeometry {
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 1;
    std::array<float, 3> quatern{0.f, 0.f, 0.f};
    std::array<float, 3> qoffset{0.f, 0.f, 0.f};
    std::array<float, 12> srow{1.f, 0.f, 0.f, 0.f, 0.f, 1.f, 0.f, 0.f, 0.f, 0.f, 1.f, 0.f};
    std::uint8_t xyzt_units = 2; // mm

    static NiftiGeometry with_spacing(const std::array<double, 3>& spacing);
};

struct NiftiImage {
    Vec3i dims{0, 0, 0};
    NiftiGeometry geometry;
    std::string description;
    std::vector<double> voxels; ///< scaled values, x fastest
};

/// Reads .nii or .nii.gz (either byte order). Only 3D images (or 4D with a
/// single volume) are accepted. Throws IoError.
NiftiImage read_nifti(const std::filesystem::path& path);

/// Writes float32 data. A `.gz` extension selects gzip compression.
void write_nifti(const std::filesystem::path& path, const Grid3<float>& data,
                 const NiftiGeometry& geometry, const std::string& description = {});

/// Writes uint8 data (labels, masks).
void write_nifti(const std::filesystem::path& path, const Grid3<std::uint8_t>& data,
                 const NiftiGeometry& geometry, const std::string& description = {});

} // namespace tseg
