#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tissueseg/model.hpp"
#include "tissueseg/sampling.hpp"

namespace tseg {

/// Per-voxel class vote counts and patch coverage.
class VoteGrid {
public:
    VoteGrid() = default;
    VoteGrid(const Vec3i& dims, int num_classes = kNumClasses);

    const Vec3i& dims() const { return dims_; }
    int num_classes() const { return classes_; }
    std::uint16_t votes(int cls, std::size_t voxel) const { return votes_[std::size_t(cls) * nvox_ + voxel]; }
    std::uint16_t coverage(std::size_t voxel) const { return coverage_[voxel]; }

    /// One vote per patch voxel for its label. Throws ShapeError when the
    /// patch leaves the grid and InvalidLabelError for labels >= num_classes.
    void add(const Vec3i& origin, const Grid3<std::uint8_t>& patch);
    /// Element-wise sum of another grid of the same shape.
    void merge(const VoteGrid& other);

    bool operator==(const VoteGrid&) const = default;

private:
    Vec3i dims_{0, 0, 0};
    int classes_ = 0;
    std::size_t nvox_ = 0;
    std::vector<std::uint16_t> votes_;
    std::vector<std::uint16_t> coverage_;
};

void accumulate_votes(VoteGrid& grid, const Vec3i& origin, const Grid3<std::uint8_t>& patch);

/// Mode per voxel, lowest class on ties, background where coverage is 0.
LabelMap fuse_votes(const VoteGrid& grid);

/// votes / coverage per class (0 where uncovered).
std::vector<Grid3<float>> vote_fractions(const VoteGrid& grid);

struct PatchPrediction {
    Vec3i origin{0, 0, 0};
    Grid3<std::uint8_t> labels; ///< argmax over classes, lowest index on ties
};

/// Runs the model on every plan origin in order. The case should already be
/// preprocessed. Throws ShapeError when the model output differs from the
/// plan's patch size.
class PatchPredictionStream {
public:
    PatchPredictionStream(const Model& model, const Case& c, SamplingPlan plan, int batch_size = 4);
    std::optional<PatchPrediction> next();

private:
    void fill();

    const Model* model_;
    ChannelStack stack_;
    SamplingPlan plan_;
    int batch_;
    std::size_t cursor_ = 0;
    std::vector<PatchPrediction> pending_;
    std::size_t pending_pos_ = 0;
};

std::vector<PatchPrediction> predict_patches(const Model& model, const Case& c, const SamplingPlan& plan);

struct SegmentOptions {
    bool restrict_plan_to_mask = true; ///< skip patches without brain voxels
    int jobs = 1;
    int batch_size = 4;
};

struct Segmentation {
    LabelMap labels;
    VoteGrid votes;
    SamplingPlan plan;
};

/// plan_grid -> predict_patches -> accumulate_votes -> fuse_votes, then
/// background outside the brain mask.
Segmentation segment_case_detailed(const Model& model, const Case& c, OverlapLevel level,
                                   const SegmentOptions& options = {});
LabelMap segment_case(const Model& model, const Case& c, OverlapLevel level, const SegmentOptions& options = {});

} // namespace tseg
