#include "tissueseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tissueseg/errors.hpp"

namespace tseg {

Volume normalize_intensity(const Volume& volume, const MaskGrid& mask)
{
    if (mask.dims() != volume.dims())
        throw DimensionMismatchError("normalize_intensity: mask " + to_string(mask.dims()) +
                                     " vs volume " + to_string(volume.dims()));
    const auto& in = volume.data();

    std::size_t n = 0;
    double sum = 0.0;
    float lo = 0.f, hi = 0.f;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!mask[i]) continue;
        const float v = in[i];
        if (n == 0) lo = hi = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++n;
    }
    if (n < 2) throw DegenerateInputError("normalize_intensity: mask needs at least two voxels");
    if (lo == hi) throw DegenerateInputError("normalize_intensity: constant intensity inside mask");

    const double mean = sum / double(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (mask[i]) ss += (in[i] - mean) * (in[i] - mean);
    const double sd = std::sqrt(ss / double(n));

    Grid3<float> out(in.dims(), 0.f);
    for (std::size_t i = 0; i < in.size(); ++i)
        if (mask[i]) out[i] = float((in[i] - mean) / sd);
    return Volume(std::move(out), volume.spacing(), volume.modality());
}

Case preprocess_case(const Case& c)
{
    std::vector<Volume> vols;
    vols.reserve(c.volumes().size());
    for (const auto& v : c.volumes()) vols.push_back(normalize_intensity(v, c.brain_mask()));
    return Case(c.case_id(), std::move(vols), c.ground_truth(), c.brain_mask());
}

ChannelStack stack_modalities(const Case& c)
{
    if (c.volumes().empty()) throw std::invalid_argument("stack_modalities: case has no modalities");
    ChannelStack s;
    s.dims = c.dims();
    s.channels = int(c.volumes().size());
    const std::size_t n = voxel_count(s.dims);
    s.data.resize(n * std::size_t(s.channels));
    for (int ch = 0; ch < s.channels; ++ch)
        std::memcpy(s.data.data() + std::size_t(ch) * n, c.volumes()[std::size_t(ch)].data().data(),
                    n * sizeof(float));
    return s;
}

} // namespace tseg
