#include "tissueseg/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "tissueseg/errors.hpp"

namespace tseg {
namespace {

struct Wave {
    std::array<double, 3> direction;
    double frequency;
    double phase;
    double amplitude;
};

/// Relative radius modulation 1 + sum_j a_j sin(w_j (u . d_j) + phi_j).
class Interface {
public:
    Interface(std::mt19937_64& rng, double base, int waves, double max_amplitude, double fmin, double fmax)
        : base_(base)
    {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int j = 0; j < waves; ++j) {
            Wave w;
            double norm = 0.0;
            for (double& c : w.direction) {
                c = gauss(rng);
                norm += c * c;
            }
            norm = std::sqrt(norm);
            for (double& c : w.direction) c /= norm;
            w.frequency = fmin + (fmax - fmin) * unit(rng);
            w.phase = 2.0 * std::numbers::pi * unit(rng);
            w.amplitude = max_amplitude * unit(rng);
            waves_.push_back(w);
        }
    }

    double radius(const std::array<double, 3>& u) const
    {
        double m = 1.0;
        for (const auto& w : waves_) {
            const double proj = u[0] * w.direction[0] + u[1] * w.direction[1] + u[2] * w.direction[2];
            m += w.amplitude * std::sin(w.frequency * proj + w.phase);
        }
        return base_ * m;
    }

private:
    double base_;
    std::vector<Wave> waves_;
};

} // namespace

Case generate_phantom(std::uint64_t seed, const Vec3i& dims, double noise_sigma, int modality_count)
{
    for (int d : dims)
        if (d < kMinPhantomExtent)
            throw std::invalid_argument("generate_phantom: every axis must be >= " +
                                        std::to_string(kMinPhantomExtent) + " to hold three shells, got " +
                                        to_string(dims));
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("generate_phantom: noise_sigma must be >= 0");
    if (modality_count < 1 || modality_count > 2)
        throw std::invalid_argument("generate_phantom: modality_count must be 1 or 2");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.5, 1.5);

    const double m = *std::min_element(dims.begin(), dims.end());
    std::array<double, 3> centre;
    for (int a = 0; a < 3; ++a) centre[a] = 0.5 * (dims[a] - 1) + jitter(rng);

    const bool dual = modality_count == 2;
    const Interface wm(rng, 0.20 * m, 3, 0.02, 2.0, 4.0);
    const Interface gm = dual ? Interface(rng, 0.31 * m, 4, 0.04, 6.0, 10.0)
                              : Interface(rng, 0.32 * m, 3, 0.02, 2.0, 4.0);
    const Interface csf(rng, 0.42 * m, 3, 0.02, 2.0, 4.0);

    Grid3<std::uint8_t> labels(dims, 0);
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const std::array<double, 3> p{x - centre[0], y - centre[1], z - centre[2]};
                const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
                std::array<double, 3> u{1.0, 0.0, 0.0};
                if (r > 0.0) u = {p[0] / r, p[1] / r, p[2] / r};
                Tissue t = Tissue::Background;
                if (r <= wm.radius(u))
                    t = Tissue::WM;
                else if (r <= gm.radius(u))
                    t = Tissue::GM;
                else if (r <= csf.radius(u))
                    t = Tissue::CSF;
                labels(x, y, z) = std::uint8_t(t);
            }

    std::vector<Grid3<float>> channels(std::size_t(modality_count), Grid3<float>(dims, 0.f));
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto t = Tissue(labels[i]);
        if (!dual) {
            channels[0][i] = float(labels[i]);
            continue;
        }
        const bool h = coin(rng);
        switch (t) {
        case Tissue::Background:
            break;
        case Tissue::WM:
            channels[0][i] = 3.f;
            channels[1][i] = 1.f;
            break;
        case Tissue::GM:
            channels[0][i] = h ? 2.f : 1.f;
            channels[1][i] = h ? 3.f : 2.f;
            break;
        case Tissue::CSF:
            channels[0][i] = h ? 2.f : 1.f;
            channels[1][i] = h ? 2.f : 3.f;
            break;
        }
    }
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (auto& ch : channels)
            for (float& v : ch.values()) v = float(v + noise(rng));
    }

    MaskGrid mask(dims, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] != 0 ? 1 : 0;

    std::vector<Volume> volumes;
    const std::array<Modality, 2> tags{Modality::T1w, Modality::T2w};
    for (int c = 0; c < modality_count; ++c)
        volumes.emplace_back(std::move(channels[std::size_t(c)]), std::array<double, 3>{1.0, 1.0, 1.0},
                             tags[std::size_t(c)]);
    return Case("phantom_" + std::to_string(seed), std::move(volumes), LabelMap(std::move(labels)),
                std::move(mask));
}

} // namespace tseg
