#include "tissueseg/sampling.hpp"

#include <algorithm>
#include <cstring>

#include "tissueseg/errors.hpp"

namespace tseg {

std::string_view to_string(OverlapLevel level)
{
    switch (level) {
    case OverlapLevel::Null: return "null";
    case OverlapLevel::Medium: return "medium";
    case OverlapLevel::High: return "high";
    }
    return "null";
}

OverlapLevel overlap_from_string(std::string_view s)
{
    if (s == "null") return OverlapLevel::Null;
    if (s == "medium") return OverlapLevel::Medium;
    if (s == "high") return OverlapLevel::High;
    throw std::invalid_argument("unknown overlap level '" + std::string(s) + "'");
}

int stride_divisor(OverlapLevel level)
{
    switch (level) {
    case OverlapLevel::Null: return 1;
    case OverlapLevel::Medium: return 2;
    case OverlapLevel::High: return 8;
    }
    return 1;
}

Vec3i overlap_stride(const Vec3i& patch_size, OverlapLevel level)
{
    Vec3i s;
    for (int a = 0; a < 3; ++a) s[a] = std::max(1, patch_size[a] / stride_divisor(level));
    return s;
}

SamplingPlan plan_grid(const Vec3i& volume_dims, const Vec3i& patch_size, OverlapLevel level)
{
    return plan_grid(volume_dims, patch_size, overlap_stride(patch_size, level));
}

SamplingPlan plan_grid(const Vec3i& volume_dims, const Vec3i& patch_size, const Vec3i& stride)
{
    std::array<std::vector<int>, 3> axis;
    for (int a = 0; a < 3; ++a) {
        if (patch_size[a] < 1 || stride[a] < 1)
            throw std::invalid_argument("plan_grid: patch size and stride must be positive");
        if (patch_size[a] > volume_dims[a])
            throw ShapeError("plan_grid: patch " + to_string(patch_size) + " larger than volume " +
                             to_string(volume_dims));
        const int last = volume_dims[a] - patch_size[a];
        for (int o = 0; o <= last; o += stride[a]) axis[a].push_back(o);
        if (axis[a].back() != last) axis[a].push_back(last);
    }
    SamplingPlan plan{volume_dims, patch_size, stride, {}};
    plan.origins.reserve(axis[0].size() * axis[1].size() * axis[2].size());
    for (int x : axis[0])
        for (int y : axis[1])
            for (int z : axis[2]) plan.origins.push_back({x, y, z});
    return plan;
}

SamplingPlan restrict_to_mask(const SamplingPlan& plan, const MaskGrid& mask)
{
    if (mask.dims() != plan.volume_dims)
        throw DimensionMismatchError("restrict_to_mask: mask " + to_string(mask.dims()) + " vs plan " +
                                     to_string(plan.volume_dims));
    SamplingPlan out{plan.volume_dims, plan.patch_size, plan.stride, {}};
    const Vec3i& p = plan.patch_size;
    for (const Vec3i& o : plan.origins) {
        bool hit = false;
        for (int z = o[2]; z < o[2] + p[2] && !hit; ++z)
            for (int y = o[1]; y < o[1] + p[1] && !hit; ++y) {
                const std::uint8_t* row = &mask(o[0], y, z);
                hit = std::any_of(row, row + p[0], [](std::uint8_t v) { return v != 0; });
            }
        if (hit) out.origins.push_back(o);
    }
    return out;
}

nlohmann::json plan_to_json(const SamplingPlan& plan)
{
    return {{"volume_dims", plan.volume_dims},
            {"patch_size", plan.patch_size},
            {"stride", plan.stride},
            {"origin_count", plan.origins.size()}};
}

std::vector<float> compute_sample_weights(const std::vector<std::uint8_t>& target)
{
    std::vector<float> w(target.size());
    std::transform(target.begin(), target.end(), w.begin(),
                   [](std::uint8_t t) { return t != 0 ? 1.f : 0.f; });
    return w;
}

void read_input_window(const ChannelStack& stack, const Vec3i& origin, const Vec3i& input_size,
                       const Vec3i& output_size, float* dst)
{
    Vec3i start;
    for (int a = 0; a < 3; ++a) {
        const int margin = input_size[a] - output_size[a];
        if (margin < 0 || margin % 2 != 0)
            throw ShapeError("input window " + to_string(input_size) + " cannot centre output " +
                             to_string(output_size));
        start[a] = origin[a] - margin / 2;
    }
    const Vec3i& d = stack.dims;
    const std::size_t nvox = voxel_count(d);
    const std::size_t win = voxel_count(input_size);
    std::fill(dst, dst + win * std::size_t(stack.channels), 0.f);

    // clipped x-range is the same for every row
    const int x0 = std::max(0, start[0]);
    const int x1 = std::min(d[0], start[0] + input_size[0]);
    if (x1 <= x0) return;
    for (int c = 0; c < stack.channels; ++c) {
        const float* src = stack.data.data() + std::size_t(c) * nvox;
        float* out = dst + std::size_t(c) * win;
        for (int k = 0; k < input_size[2]; ++k) {
            const int z = start[2] + k;
            if (z < 0 || z >= d[2]) continue;
            for (int j = 0; j < input_size[1]; ++j) {
                const int y = start[1] + j;
                if (y < 0 || y >= d[1]) continue;
                const std::size_t s = std::size_t(x0) + std::size_t(d[0]) * (std::size_t(y) + std::size_t(d[1]) * z);
                const std::size_t t = std::size_t(x0 - start[0]) +
                                      std::size_t(input_size[0]) * (std::size_t(j) + std::size_t(input_size[1]) * k);
                std::memcpy(out + t, src + s, std::size_t(x1 - x0) * sizeof(float));
            }
        }
    }
}

TrainingSampleStream::TrainingSampleStream(const Case& c, SamplingPlan plan, const Vec3i& input_size,
                                           const Vec3i& output_size)
    : case_(&c), stack_(stack_modalities(c)), plan_(std::move(plan)), input_size_(input_size),
      output_size_(output_size)
{
    if (!c.ground_truth())
        throw std::invalid_argument("extract_training_samples: case '" + c.case_id() + "' has no ground truth");
    if (plan_.patch_size != output_size)
        throw std::invalid_argument("extract_training_samples: plan patch " + to_string(plan_.patch_size) +
                                    " differs from output size " + to_string(output_size));
    if (plan_.volume_dims != c.dims())
        throw DimensionMismatchError("extract_training_samples: plan built for " + to_string(plan_.volume_dims));
    for (int a = 0; a < 3; ++a)
        if (input_size[a] < output_size[a])
            throw ShapeError("extract_training_samples: input smaller than output");
}

std::optional<TrainingSample> TrainingSampleStream::next()
{
    const LabelMap& gt = *case_->ground_truth();
    const Vec3i& o = output_size_;
    while (cursor_ < plan_.origins.size()) {
        const Vec3i origin = plan_.origins[cursor_++];

        std::vector<std::uint8_t> target(voxel_count(o));
        bool tissue = false;
        for (int z = 0; z < o[2]; ++z)
            for (int y = 0; y < o[1]; ++y)
                for (int x = 0; x < o[0]; ++x) {
                    const auto v = gt.labels()(origin[0] + x, origin[1] + y, origin[2] + z);
                    target[std::size_t(x) + std::size_t(o[0]) * (std::size_t(y) + std::size_t(o[1]) * z)] = v;
                    tissue |= v != 0;
                }
        if (!tissue) continue;

        TrainingSample s;
        s.origin = origin;
        s.input_size = input_size_;
        s.output_size = output_size_;
        s.channels = stack_.channels;
        s.input.resize(voxel_count(input_size_) * std::size_t(stack_.channels));
        read_input_window(stack_, origin, input_size_, output_size_, s.input.data());
        s.weight = compute_sample_weights(target);
        s.target = std::move(target);
        return s;
    }
    return std::nullopt;
}

std::vector<TrainingSample> extract_training_samples(const Case& c, const SamplingPlan& plan,
                                                     const Vec3i& input_size, const Vec3i& output_size)
{
    TrainingSampleStream stream(c, plan, input_size, output_size);
    std::vector<TrainingSample> out;
    while (auto s = stream.next()) out.push_back(std::move(*s));
    return out;
}

} // namespace tseg
