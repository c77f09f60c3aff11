#include <random>

#include "doctest.h"

#include "tissueseg/errors.hpp"
#include "tissueseg/phantom.hpp"
#include "tissueseg/preprocess.hpp"
#include "tissueseg/sampling.hpp"

using namespace tseg;

namespace {

// Number of origins per axis: the regular grid plus one clamped origin when
// the last step misses the far edge.
int axis_count(int d, int p, int s)
{
    const int last = d - p;
    return last / s + 1 + (last % s != 0 ? 1 : 0);
}

} // namespace

TEST_CASE("stride per overlap level")
{
    CHECK(overlap_stride({32, 32, 32}, OverlapLevel::Null) == Vec3i{32, 32, 32});
    CHECK(overlap_stride({32, 32, 32}, OverlapLevel::Medium) == Vec3i{16, 16, 16});
    CHECK(overlap_stride({32, 32, 32}, OverlapLevel::High) == Vec3i{4, 4, 4});
    CHECK(overlap_stride({9, 9, 1}, OverlapLevel::High) == Vec3i{1, 1, 1});
    CHECK(overlap_from_string("medium") == OverlapLevel::Medium);
    CHECK_THROWS_AS(overlap_from_string("some"), std::invalid_argument);
}

TEST_CASE("256 cube with 32 cube patches")
{
    CHECK(plan_grid({256, 256, 256}, {32, 32, 32}, OverlapLevel::Null).origins.size() == 512);
    CHECK(plan_grid({256, 256, 256}, {32, 32, 32}, OverlapLevel::Medium).origins.size() == 3375);
    CHECK(plan_grid({256, 256, 256}, {32, 32, 32}, OverlapLevel::High).origins.size() == 185193);
}

TEST_CASE("patch equal to volume gives one origin at every level")
{
    for (auto l : {OverlapLevel::Null, OverlapLevel::Medium, OverlapLevel::High}) {
        const auto p = plan_grid({32, 32, 32}, {32, 32, 32}, l);
        REQUIRE(p.origins.size() == 1);
        CHECK(p.origins[0] == Vec3i{0, 0, 0});
    }
    CHECK_THROWS_AS(plan_grid({31, 32, 32}, {32, 32, 32}, OverlapLevel::Null), ShapeError);
}

TEST_CASE("plans cover every voxel, stay in bounds and are ordered")
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        Vec3i d, p;
        for (int a = 0; a < 3; ++a) {
            d[a] = 1 + int(rng() % 40);
            p[a] = 1 + int(rng() % std::uint64_t(d[a]));
        }
        const auto level = OverlapLevel(rng() % 3);
        const auto plan = plan_grid(d, p, level);
        const Vec3i s = overlap_stride(p, level);
        CHECK(plan.origins.size() ==
              std::size_t(axis_count(d[0], p[0], s[0]) * axis_count(d[1], p[1], s[1]) * axis_count(d[2], p[2], s[2])));
        Grid3<int> cover(d, 0);
        for (std::size_t i = 0; i < plan.origins.size(); ++i) {
            const Vec3i& o = plan.origins[i];
            for (int a = 0; a < 3; ++a) {
                CHECK(o[a] >= 0);
                CHECK(o[a] + p[a] <= d[a]);
            }
            if (i > 0) CHECK(plan.origins[i - 1] < o);
            for (int z = o[2]; z < o[2] + p[2]; ++z)
                for (int y = o[1]; y < o[1] + p[1]; ++y)
                    for (int x = o[0]; x < o[0] + p[0]; ++x) cover(x, y, z)++;
        }
        for (int c : cover.values()) REQUIRE(c > 0);
    }
}

TEST_CASE("restrict_to_mask keeps exactly the patches touching the mask")
{
    MaskGrid mask({20, 20, 20}, 0);
    mask(3, 3, 3) = 1;
    const auto plan = plan_grid({20, 20, 20}, {5, 5, 5}, OverlapLevel::Null);
    const auto kept = restrict_to_mask(plan, mask);
    REQUIRE(kept.origins.size() == 1);
    CHECK(kept.origins[0] == Vec3i{0, 0, 0});
    CHECK_THROWS_AS(restrict_to_mask(plan, MaskGrid({20, 20, 21}, 1)), DimensionMismatchError);
}

TEST_CASE("sample weights mask out background")
{
    const auto w = compute_sample_weights({0, 1, 2, 3, 0});
    CHECK(w == std::vector<float>{0.f, 1.f, 1.f, 1.f, 0.f});
}

TEST_CASE("training samples carry the centred input window and the target")
{
    const Case c = preprocess_case(generate_phantom(3, {40, 40, 40}, 0.1));
    const Vec3i out{8, 8, 8}, in{14, 14, 14};
    const auto plan = plan_grid(c.dims(), out, OverlapLevel::Null);
    const auto samples = extract_training_samples(c, plan, in, out);
    CHECK(samples.size() < plan.origins.size()); // corner patches are all background
    const ChannelStack stack = stack_modalities(c);
    const auto& gt = c.ground_truth()->labels();
    for (const auto& s : samples) {
        bool tissue = false;
        for (int z = 0; z < out[2]; ++z)
            for (int y = 0; y < out[1]; ++y)
                for (int x = 0; x < out[0]; ++x) {
                    const std::size_t i = std::size_t(x + out[0] * (y + out[1] * z));
                    const auto l = gt(s.origin[0] + x, s.origin[1] + y, s.origin[2] + z);
                    CHECK(s.target[i] == l);
                    CHECK(s.weight[i] == (l ? 1.f : 0.f));
                    tissue |= l != 0;
                }
        CHECK(tissue);
        // input voxel (3, 3, 3) sits on output voxel (0, 0, 0)
        const std::size_t j = std::size_t(3 + in[0] * (3 + in[1] * 3));
        CHECK(s.input[j] == stack.channel(0)[std::size_t(s.origin[0] + 40 * (s.origin[1] + 40 * s.origin[2]))]);
    }
}

TEST_CASE("input windows past the border are zero padded")
{
    ChannelStack s;
    s.dims = {4, 4, 4};
    s.channels = 1;
    s.data.assign(64, 1.f);
    std::vector<float> buf(6 * 6 * 6);
    read_input_window(s, {0, 0, 0}, {6, 6, 6}, {4, 4, 4}, buf.data());
    CHECK(buf[0] == 0.f);
    CHECK(buf[1 + 6 * (1 + 6 * 1)] == 1.f);
    CHECK_THROWS_AS(read_input_window(s, {0, 0, 0}, {5, 6, 6}, {4, 4, 4}, buf.data()), ShapeError);
}
