#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "tissueseg/checkpoint.hpp"
#include "tissueseg/errors.hpp"
#include "tissueseg/model.hpp"
#include "tissueseg/trainer.hpp"

using namespace tseg;
namespace fs = std::filesystem;

namespace {

nn::Tensor random_input(const ArchitectureSpec& spec, int n, std::uint64_t seed)
{
    nn::Tensor t(n, spec.in_channels, spec.input_size);
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.f, 1.f);
    for (float& v : t.data) v = g(rng);
    return t;
}

struct Batch {
    nn::Tensor input;
    std::vector<std::uint8_t> targets;
    std::vector<float> weights;
};

Batch random_batch(const ArchitectureSpec& spec, int n, std::uint64_t seed)
{
    Batch b{random_input(spec, n, seed), {}, {}};
    std::mt19937_64 rng(seed + 1);
    const std::size_t vox = std::size_t(n) * voxel_count(spec.output_size);
    for (std::size_t i = 0; i < vox; ++i) {
        b.targets.push_back(std::uint8_t(rng() % 4));
        b.weights.push_back(b.targets.back() ? 1.f : 0.f);
    }
    return b;
}

double loss_of(Model& m, const Batch& b)
{
    return weighted_loss_gradient(m.forward_train(b.input).logits(), b.targets, b.weights)->loss;
}

// Analytic gradient of every parameter, flattened.
std::vector<double> analytic_gradient(Model& m, const Batch& b)
{
    m.zero_grad();
    const auto trace = m.forward_train(b.input);
    const auto lg = weighted_loss_gradient(trace.logits(), b.targets, b.weights);
    m.backward(trace, lg->grad);
    std::vector<double> g;
    for (const auto& p : m.parameters()) g.insert(g.end(), p.grad.begin(), p.grad.end());
    return g;
}

ArchitectureSpec tiny(Family f, Dimensionality d)
{
    PatchConfig pc;
    pc.width_scale = 0.0625;
    const bool d3 = d == Dimensionality::D3;
    int o = 8;
    if (f == Family::DM) o = 2;
    if (f == Family::KK) o = 3;
    pc.output_size = Vec3i{o, o, d3 ? o : 1};
    return build_spec(f, d, 2, pc);
}

} // namespace

TEST_CASE("predictions are distributions of the right shape")
{
    for (Family f : kFamilies) {
        const auto spec = tiny(f, Dimensionality::D2);
        const Model m(spec, 3);
        const nn::Tensor p = m.predict(random_input(spec, 2, 5));
        CHECK(p.n == 2);
        CHECK(p.c == 4);
        CHECK(p.dims == spec.output_size);
        for (int n = 0; n < 2; ++n)
            for (std::size_t v = 0; v < p.spatial(); ++v) {
                double s = 0;
                for (int c = 0; c < 4; ++c) s += p.data[(std::size_t(n) * 4 + c) * p.spatial() + v];
                CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
            }
    }
}

TEST_CASE("inference is per-sample and rejects wrong input shapes")
{
    const auto spec = tiny(Family::UResNet, Dimensionality::D3);
    const Model m(spec, 1);
    const nn::Tensor both = random_input(spec, 2, 9);
    nn::Tensor second(1, both.c, both.dims);
    std::copy(both.sample(1), both.sample(1) + both.sample_size(), second.data.begin());
    const nn::Tensor a = m.logits(both), b = m.logits(second);
    for (std::size_t i = 0; i < b.data.size(); ++i) CHECK(a.sample(1)[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
    nn::Tensor wrong(1, spec.in_channels + 1, spec.input_size);
    CHECK_THROWS(m.logits(wrong));
}

TEST_CASE("initialization is a pure function of the seed")
{
    const auto spec = tiny(Family::DM, Dimensionality::D3);
    const Model a(spec, 42), b(spec, 42), c(spec, 43);
    CHECK(a.state().params == b.state().params);
    CHECK_FALSE(a.state().params == c.state().params);
    for (const auto& p : a.parameters()) {
        if (p.name.ends_with("/alpha"))
            for (float v : p.value) CHECK(v == 0.25f);
        if (p.name.ends_with("/bias"))
            for (float v : p.value) CHECK(v == 0.f);
    }
}

TEST_CASE("backward matches central differences on tiny versions of every family")
{
    for (Family f : kFamilies)
        for (auto d : {Dimensionality::D2, Dimensionality::D3}) {
            CAPTURE(to_string(f));
            CAPTURE(to_string(d));
            Model m(tiny(f, d), 7);
            const Batch b = random_batch(m.spec(), 2, 11);
            const std::vector<double> g = analytic_gradient(m, b);

            // directional derivative along a random unit direction
            std::mt19937_64 rng(5);
            std::normal_distribution<double> gauss(0, 1);
            std::vector<double> dir(g.size());
            double norm = 0;
            for (double& x : dir) {
                x = gauss(rng);
                norm += x * x;
            }
            double an = 0, gnorm = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                an += g[i] * dir[i] / std::sqrt(norm);
                gnorm += g[i] * g[i];
            }
            const double eps = 2e-3; // small enough that few PReLU kinks are crossed
            auto shifted = [&](double s) {
                std::size_t k = 0;
                Model copy = m;
                for (auto& p : copy.parameters())
                    for (float& v : p.value) v = float(v + s * dir[k++] / std::sqrt(norm));
                return loss_of(copy, b);
            };
            const double fd = (shifted(eps) - shifted(-eps)) / (2 * eps);
            // a random direction sees only ~1/sqrt(n) of the gradient, so
            // the tolerance follows the full gradient norm
            CHECK(std::abs(fd - an) <= 1e-2 * std::max(std::abs(an), 0.1 * std::sqrt(gnorm)));
        }
}

TEST_CASE("state round trip and checkpoint files")
{
    const auto dir = fs::temp_directory_path() / "tissueseg_model";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto spec = tiny(Family::UResNet, Dimensionality::D2);
    Model m(spec, 3);
    // move batchnorm running stats away from their defaults
    m.forward_train(random_input(spec, 2, 1));
    const nn::Tensor x = random_input(spec, 1, 2);

    save_checkpoint(m, dir / "m.ck", {{"note", "unit"}});
    const LoadedCheckpoint back = load_checkpoint(dir / "m.ck");
    CHECK(back.model.spec() == spec);
    CHECK(back.extra.at("note") == "unit");
    CHECK(back.model.state().params == m.state().params);
    CHECK(back.model.state().buffers == m.state().buffers);
    CHECK(back.model.logits(x).data == m.logits(x).data);

    Model other(spec, 99);
    other.load_state(m.state());
    CHECK(other.logits(x).data == m.logits(x).data);

    // truncated and foreign files
    const auto size = fs::file_size(dir / "m.ck");
    fs::copy_file(dir / "m.ck", dir / "short.ck");
    fs::resize_file(dir / "short.ck", size - 10);
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ck"), IoError);
    std::ofstream(dir / "junk.ck") << "junk junk junk junk";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.ck"), IoError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.ck"), IoError);
}
