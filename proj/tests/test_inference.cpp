#include <algorithm>
#include <random>

#include "doctest.h"

#include "tissueseg/errors.hpp"
#include "tissueseg/inference.hpp"
#include "tissueseg/phantom.hpp"
#include "tissueseg/preprocess.hpp"

using namespace tseg;

namespace {

Grid3<std::uint8_t> cut(const Grid3<std::uint8_t>& labels, const Vec3i& o, const Vec3i& p)
{
    Grid3<std::uint8_t> out(p);
    for (int z = 0; z < p[2]; ++z)
        for (int y = 0; y < p[1]; ++y)
            for (int x = 0; x < p[0]; ++x) out(x, y, z) = labels(o[0] + x, o[1] + y, o[2] + z);
    return out;
}

Grid3<std::uint8_t> random_labels(const Vec3i& d, std::mt19937_64& rng)
{
    Grid3<std::uint8_t> g(d);
    for (auto& v : g.values()) v = std::uint8_t(rng() % 4);
    return g;
}

} // namespace

TEST_CASE("fusing ground-truth patches reproduces the label map")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Vec3i d, p;
        for (int a = 0; a < 3; ++a) {
            d[a] = 4 + int(rng() % 20);
            p[a] = 1 + int(rng() % std::uint64_t(d[a]));
        }
        const auto labels = random_labels(d, rng);
        const auto plan = plan_grid(d, p, OverlapLevel(trial % 3));
        VoteGrid g(d);
        for (const auto& o : plan.origins) accumulate_votes(g, o, cut(labels, o, p));
        CHECK(fuse_votes(g).labels() == labels);
    }
}

TEST_CASE("vote accumulation is order independent and merges additively")
{
    std::mt19937_64 rng(4);
    const Vec3i d{12, 10, 8}, p{4, 4, 4};
    const auto plan = plan_grid(d, p, OverlapLevel::High);
    std::vector<Grid3<std::uint8_t>> patches;
    for (std::size_t i = 0; i < plan.origins.size(); ++i) patches.push_back(random_labels(p, rng));

    VoteGrid forward(d), shuffled(d), left(d), right(d);
    std::vector<std::size_t> order(plan.origins.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (auto i : order) forward.add(plan.origins[i], patches[i]);
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) shuffled.add(plan.origins[i], patches[i]);
    for (std::size_t i = 0; i < order.size(); ++i) (i % 2 ? left : right).add(plan.origins[i], patches[i]);
    left.merge(right);
    CHECK(shuffled == forward);
    CHECK(left == forward);
    CHECK_THROWS_AS(left.merge(VoteGrid({1, 1, 1})), ShapeError);
}

TEST_CASE("ties go to the lowest class and uncovered voxels to background")
{
    VoteGrid g({2, 1, 1});
    Grid3<std::uint8_t> a({1, 1, 1}, 3), b({1, 1, 1}, 2);
    g.add({0, 0, 0}, a);
    g.add({0, 0, 0}, b);
    const LabelMap fused = fuse_votes(g);
    CHECK(fused[0] == 2);
    CHECK(fused[1] == 0);
    const auto fr = vote_fractions(g);
    CHECK(fr[2][0] == 0.5f);
    CHECK(fr[3][0] == 0.5f);
    CHECK(fr[0][1] == 0.f);
}

TEST_CASE("bad patches are refused")
{
    VoteGrid g({4, 4, 4});
    CHECK_THROWS_AS(g.add({2, 0, 0}, Grid3<std::uint8_t>({3, 1, 1}, 0)), ShapeError);
    CHECK_THROWS_AS(g.add({-1, 0, 0}, Grid3<std::uint8_t>({1, 1, 1}, 0)), ShapeError);
    CHECK_THROWS_AS(g.add({0, 0, 0}, Grid3<std::uint8_t>({1, 1, 1}, 4)), InvalidLabelError);
}

TEST_CASE("majority voting outvotes a minority of corrupted patches")
{
    std::mt19937_64 rng(8);
    const Vec3i d{24, 24, 24}, p{8, 8, 8};
    const auto labels = random_labels(d, rng);
    const auto plan = plan_grid(d, p, OverlapLevel::High);
    VoteGrid g(d);
    std::vector<int> bad_cover(voxel_count(d), 0);
    for (const auto& o : plan.origins) {
        auto patch = cut(labels, o, p);
        if (rng() % 5 == 0) {
            // every voxel of this patch gets the same wrong label
            for (auto& v : patch.values()) v = std::uint8_t((v + 1) % 4);
            for (int z = 0; z < p[2]; ++z)
                for (int y = 0; y < p[1]; ++y)
                    for (int x = 0; x < p[0]; ++x) bad_cover[labels.index(o[0] + x, o[1] + y, o[2] + z)]++;
        }
        g.add(o, patch);
    }
    const LabelMap fused = fuse_votes(g);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < fused.size(); ++i)
        if (2 * bad_cover[i] < g.coverage(i)) {
            CHECK(fused[i] == labels[i]);
            ++checked;
        }
    CHECK(checked > fused.size() / 2);
}

TEST_CASE("segment_case respects the mask and is independent of the job count")
{
    const Case c = preprocess_case(generate_phantom(2, {32, 32, 32}, 0.05));
    PatchConfig pc;
    pc.width_scale = 0.125;
    pc.output_size = Vec3i{16, 16, 16};
    const Model m(build_spec(Family::UNet, Dimensionality::D3, 1, pc), 1);
    SegmentOptions one, three;
    three.jobs = 3;
    const Segmentation a = segment_case_detailed(m, c, OverlapLevel::Medium, one);
    const Segmentation b = segment_case_detailed(m, c, OverlapLevel::Medium, three);
    CHECK(a.labels == b.labels);
    CHECK(a.votes == b.votes);
    CHECK(a.plan.origins.size() == 27);
    for (std::size_t i = 0; i < a.labels.size(); ++i)
        if (!c.brain_mask()[i]) CHECK(a.labels[i] == 0);
    // every brain voxel is covered by some patch
    for (std::size_t i = 0; i < a.labels.size(); ++i)
        if (c.brain_mask()[i]) REQUIRE(a.votes.coverage(i) > 0);

    const auto preds = predict_patches(m, c, plan_grid(c.dims(), {16, 16, 16}, OverlapLevel::Null));
    CHECK(preds.size() == 8);
    CHECK(preds[0].labels.dims() == Vec3i{16, 16, 16});
    CHECK_THROWS_AS(predict_patches(m, c, plan_grid(c.dims(), {8, 8, 8}, OverlapLevel::Null)), ShapeError);
    const Case two = preprocess_case(generate_phantom(2, {32, 32, 32}, 0.05, 2));
    CHECK_THROWS(predict_patches(m, two, plan_grid(c.dims(), {16, 16, 16}, OverlapLevel::Null)));
}
