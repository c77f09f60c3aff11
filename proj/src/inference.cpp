#include "tissueseg/inference.hpp"

#include <thread>

#include "tissueseg/errors.hpp"

namespace tseg {

VoteGrid::VoteGrid(const Vec3i& dims, int num_classes)
    : dims_(dims), classes_(num_classes), nvox_(voxel_count(dims)),
      votes_(std::size_t(num_classes) * nvox_, 0), coverage_(nvox_, 0)
{
    if (num_classes < 1) throw std::invalid_argument("VoteGrid: need at least one class");
}

void VoteGrid::add(const Vec3i& origin, const Grid3<std::uint8_t>& patch)
{
    const Vec3i& p = patch.dims();
    for (int a = 0; a < 3; ++a)
        if (origin[a] < 0 || origin[a] + p[a] > dims_[a])
            throw ShapeError("accumulate_votes: patch " + to_string(p) + " at " + to_string(origin) +
                             " leaves grid " + to_string(dims_));
    std::size_t k = 0;
    for (int z = 0; z < p[2]; ++z)
        for (int y = 0; y < p[1]; ++y) {
            const std::size_t row = std::size_t(origin[0]) +
                                    std::size_t(dims_[0]) * (std::size_t(origin[1] + y) + std::size_t(dims_[1]) * (origin[2] + z));
            for (int x = 0; x < p[0]; ++x, ++k) {
                const int label = patch[k];
                if (label >= classes_) throw InvalidLabelError("accumulate_votes: label outside class set");
                ++votes_[std::size_t(label) * nvox_ + row + x];
                ++coverage_[row + x];
            }
        }
}

void VoteGrid::merge(const VoteGrid& other)
{
    if (other.dims_ != dims_ || other.classes_ != classes_) throw ShapeError("VoteGrid::merge: shape mismatch");
    for (std::size_t i = 0; i < votes_.size(); ++i) votes_[i] += other.votes_[i];
    for (std::size_t i = 0; i < coverage_.size(); ++i) coverage_[i] += other.coverage_[i];
}

void accumulate_votes(VoteGrid& grid, const Vec3i& origin, const Grid3<std::uint8_t>& patch)
{
    grid.add(origin, patch);
}

LabelMap fuse_votes(const VoteGrid& grid)
{
    Grid3<std::uint8_t> out(grid.dims(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (grid.coverage(i) == 0) continue;
        int best = 0;
        for (int c = 1; c < grid.num_classes(); ++c)
            if (grid.votes(c, i) > grid.votes(best, i)) best = c;
        out[i] = std::uint8_t(best);
    }
    return LabelMap(std::move(out));
}

std::vector<Grid3<float>> vote_fractions(const VoteGrid& grid)
{
    std::vector<Grid3<float>> out(std::size_t(grid.num_classes()), Grid3<float>(grid.dims(), 0.f));
    const std::size_t n = voxel_count(grid.dims());
    for (int c = 0; c < grid.num_classes(); ++c)
        for (std::size_t i = 0; i < n; ++i)
            if (grid.coverage(i)) out[std::size_t(c)][i] = float(grid.votes(c, i)) / float(grid.coverage(i));
    return out;
}

PatchPredictionStream::PatchPredictionStream(const Model& model, const Case& c, SamplingPlan plan, int batch_size)
    : model_(&model), stack_(stack_modalities(c)), plan_(std::move(plan)), batch_(std::max(1, batch_size))
{
    const ArchitectureSpec& spec = model.spec();
    if (plan_.patch_size != spec.output_size)
        throw ShapeError("predict_patches: model output " + to_string(spec.output_size) + " differs from plan patch " +
                         to_string(plan_.patch_size));
    if (plan_.volume_dims != c.dims())
        throw DimensionMismatchError("predict_patches: plan built for " + to_string(plan_.volume_dims) +
                                     ", case is " + to_string(c.dims()));
    if (int(c.modality_count()) != spec.in_channels)
        throw ShapeError("predict_patches: model takes " + std::to_string(spec.in_channels) + " channels, case has " +
                         std::to_string(c.modality_count()));
}

void PatchPredictionStream::fill()
{
    pending_.clear();
    pending_pos_ = 0;
    const ArchitectureSpec& spec = model_->spec();
    const std::size_t end = std::min(plan_.origins.size(), cursor_ + std::size_t(batch_));
    if (cursor_ >= end) return;
    nn::Tensor x(int(end - cursor_), spec.in_channels, spec.input_size);
    for (std::size_t i = cursor_; i < end; ++i)
        read_input_window(stack_, plan_.origins[i], spec.input_size, spec.output_size, x.sample(int(i - cursor_)));
    // argmax of the logits equals argmax of the softmax
    const nn::Tensor z = model_->logits(x);
    const std::size_t v = z.spatial();
    for (std::size_t i = cursor_; i < end; ++i) {
        const float* l = z.sample(int(i - cursor_));
        Grid3<std::uint8_t> labels(z.dims, 0);
        for (std::size_t k = 0; k < v; ++k) {
            int best = 0;
            for (int c = 1; c < z.c; ++c)
                if (l[std::size_t(c) * v + k] > l[std::size_t(best) * v + k]) best = c;
            labels[k] = std::uint8_t(best);
        }
        pending_.push_back({plan_.origins[i], std::move(labels)});
    }
    cursor_ = end;
}

std::optional<PatchPrediction> PatchPredictionStream::next()
{
    if (pending_pos_ >= pending_.size()) fill();
    if (pending_pos_ >= pending_.size()) return std::nullopt;
    return std::move(pending_[pending_pos_++]);
}

std::vector<PatchPrediction> predict_patches(const Model& model, const Case& c, const SamplingPlan& plan)
{
    PatchPredictionStream stream(model, c, plan);
    std::vector<PatchPrediction> out;
    while (auto p = stream.next()) out.push_back(std::move(*p));
    return out;
}

Segmentation segment_case_detailed(const Model& model, const Case& c, OverlapLevel level,
                                   const SegmentOptions& options)
{
    SamplingPlan plan = plan_grid(c.dims(), model.spec().output_size, level);
    if (options.restrict_plan_to_mask) plan = restrict_to_mask(plan, c.brain_mask());

    const int jobs = std::max(1, std::min<int>(options.jobs, int(plan.origins.size())));
    std::vector<VoteGrid> partial(std::size_t(jobs), VoteGrid(c.dims(), model.spec().num_classes));
    auto work = [&](int j) {
        // contiguous share of the plan per worker; merging is order-free
        SamplingPlan part{plan.volume_dims, plan.patch_size, plan.stride, {}};
        const std::size_t n = plan.origins.size();
        const std::size_t b = n * std::size_t(j) / std::size_t(jobs), e = n * std::size_t(j + 1) / std::size_t(jobs);
        part.origins.assign(plan.origins.begin() + std::ptrdiff_t(b), plan.origins.begin() + std::ptrdiff_t(e));
        PatchPredictionStream stream(model, c, std::move(part), options.batch_size);
        while (auto p = stream.next()) partial[std::size_t(j)].add(p->origin, p->labels);
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(work, j);
        for (auto& t : threads) t.join();
    }
    for (int j = 1; j < jobs; ++j) partial[0].merge(partial[std::size_t(j)]);

    Segmentation out{fuse_votes(partial[0]), std::move(partial[0]), std::move(plan)};
    Grid3<std::uint8_t> labels = out.labels.labels();
    const MaskGrid& mask = c.brain_mask();
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!mask[i]) labels[i] = 0;
    out.labels = LabelMap(std::move(labels));
    return out;
}

LabelMap segment_case(const Model& model, const Case& c, OverlapLevel level, const SegmentOptions& options)
{
    return segment_case_detailed(model, c, level, options).labels;
}

} // namespace tseg
