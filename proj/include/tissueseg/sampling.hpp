#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tissueseg/preprocess.hpp"
#include "tissueseg/volume.hpp"

namespace tseg {

/// Overlap between neighbouring patches: ~0%, ~50% and ~90%.
enum class OverlapLevel { Null, Medium, High };

std::string_view to_string(OverlapLevel level);
OverlapLevel overlap_from_string(std::string_view s);

/// 1, 2 and 8 for null, medium and high overlap.
int stride_divisor(OverlapLevel level);

/// floor(patch / divisor) per axis, never below 1.
Vec3i overlap_stride(const Vec3i& patch_size, OverlapLevel level);

struct SamplingPlan {
    Vec3i volume_dims{0, 0, 0};
    Vec3i patch_size{0, 0, 0};
    Vec3i stride{0, 0, 0};
    std::vector<Vec3i> origins; ///< lexicographic (x, y, z) order
};

/// Regular origin grid 0, s, 2s, ... per axis; when the last step does not
/// land on D - P an extra origin clamped to D - P is appended so every voxel
/// is covered. Throws ShapeError if the patch exceeds the volume.
SamplingPlan plan_grid(const Vec3i& volume_dims, const Vec3i& patch_size, OverlapLevel level);
SamplingPlan plan_grid(const Vec3i& volume_dims, const Vec3i& patch_size, const Vec3i& stride);

/// Keeps only origins whose patch contains at least one mask voxel.
SamplingPlan restrict_to_mask(const SamplingPlan& plan, const MaskGrid& mask);

/// Provenance document: patch_size, stride, volume_dims, origin_count.
nlohmann::json plan_to_json(const SamplingPlan& plan);

struct TrainingSample {
    Vec3i origin{0, 0, 0};          ///< output-region corner in volume coordinates
    Vec3i input_size{0, 0, 0};
    Vec3i output_size{0, 0, 0};
    int channels = 0;
    std::vector<float> input;       ///< [channel][z][y][x] over input_size
    std::vector<std::uint8_t> target; ///< over output_size
    std::vector<float> weight;      ///< over output_size
};

/// 1 for tissue voxels, 0 for background.
std::vector<float> compute_sample_weights(const std::vector<std::uint8_t>& target);

/// Copies the input window (zero outside the volume) whose centre region is
/// the output region at `origin`. `input_size - output_size` must be even
/// per axis.
void read_input_window(const ChannelStack& stack, const Vec3i& origin, const Vec3i& input_size,
                       const Vec3i& output_size, float* dst);

/// Lazily walks the plan in order and yields one sample per origin whose
/// output region holds at least one tissue voxel.
class TrainingSampleStream {
public:
    /// Throws std::invalid_argument when the case has no ground truth or the
    /// plan was not built for `output_size`.
    TrainingSampleStream(const Case& c, SamplingPlan plan, const Vec3i& input_size, const Vec3i& output_size);

    std::optional<TrainingSample> next();

private:
    const Case* case_;
    ChannelStack stack_;
    SamplingPlan plan_;
    Vec3i input_size_, output_size_;
    std::size_t cursor_ = 0;
};

/// Drains a TrainingSampleStream.
std::vector<TrainingSample> extract_training_samples(const Case& c, const SamplingPlan& plan,
                                                     const Vec3i& input_size, const Vec3i& output_size);

} // namespace tseg
