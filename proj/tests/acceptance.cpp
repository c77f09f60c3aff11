// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 1 2 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tissueseg/architecture.hpp"
#include "tissueseg/experiment.hpp"
#include "tissueseg/inference.hpp"
#include "tissueseg/metrics.hpp"
#include "tissueseg/phantom.hpp"
#include "tissueseg/preprocess.hpp"
#include "tissueseg/report.hpp"
#include "tissueseg/sampling.hpp"
#include "tissueseg/trainer.hpp"
#include "tissueseg/wilcoxon.hpp"

using namespace tseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// 1. patch counts

Outcome patch_counts()
{
    const auto t0 = Clock::now();
    const std::size_t n0 = plan_grid({256, 256, 256}, {32, 32, 32}, OverlapLevel::Null).origins.size();
    const std::size_t n1 = plan_grid({256, 256, 256}, {32, 32, 32}, OverlapLevel::Medium).origins.size();
    const std::size_t n2 = plan_grid({256, 256, 256}, {32, 32, 32}, OverlapLevel::High).origins.size();
    const double dt = seconds_since(t0);
    std::ostringstream s;
    s << "null " << n0 << ", medium " << n1 << ", high " << n2 << " (want 512/3375/185193), " << fmt("%.3f s", dt);
    return {n0 == 512 && n1 == 3375 && n2 == 185193 && dt < 1.0, s.str()};
}

// ---------------------------------------------------------------------------
// 2. parameter counts

Outcome parameter_counts()
{
    const auto t0 = Clock::now();
    // reference counts, 2D then 3D
    const std::int64_t table[4][2] = {{569138, 7099418}, {547053, 3332595}, {1930756, 5605444}, {994212, 2622948}};
    std::int64_t n[4][2];
    double worst = 0.0;
    std::string worst_name;
    for (Family f : kFamilies)
        for (int d = 0; d < 2; ++d) {
            n[int(f)][d] = count_parameters(build_spec(f, d ? Dimensionality::D3 : Dimensionality::D2, 1));
            const double rel = std::abs(double(n[int(f)][d]) / double(table[int(f)][d]) - 1.0);
            if (rel > worst) {
                worst = rel;
                worst_name = std::string(to_string(f)) + (d ? " 3D" : " 2D");
            }
        }
    // the reference order within each dimensionality must hold exactly
    bool order = true;
    for (int d = 0; d < 2; ++d)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (table[a][d] > table[b][d]) order &= n[a][d] > n[b][d];
    const double dt = seconds_since(t0);
    std::ostringstream s;
    s << "largest deviation " << fmt("%.1f%%", 100 * worst) << " (" << worst_name << "), ordering "
      << (order ? "kept" : "broken") << ", " << fmt("%.2f s", dt);
    return {worst <= 0.15 && order && dt < 10.0, s.str()};
}

// ---------------------------------------------------------------------------
// 3. DSC

LabelMap line(const std::vector<std::uint8_t>& v) { return LabelMap(Grid3<std::uint8_t>({int(v.size()), 1, 1}, v)); }

Outcome dsc_suite()
{
    const auto t0 = Clock::now();
    int bad = 0;
    const LabelMap g = line({1, 1, 1, 1, 0, 0, 2, 2});
    bad += dice(g, g, 1) != 1.0;
    bad += dice(g, line({0, 0, 0, 0, 1, 1, 2, 2}), 1) != 0.0;
    bad += std::abs(dice(g, line({1, 1, 0, 0, 0, 0, 2, 2}), 1) - 2.0 / 3.0) > 1e-12; // 2*2 / (4+2)
    bad += std::abs(dice(g, line({1, 1, 1, 1, 1, 1, 2, 2}), 1) - 0.8) > 1e-12;       // 2*4 / (4+6)
    bad += std::abs(dice(g, line({1, 0, 1, 0, 1, 0, 2, 2}), 1) - 4.0 / 7.0) > 1e-12; // 2*2 / (4+3)

    std::mt19937_64 rng(99);
    for (int t = 0; t < 1000; ++t) {
        const int len = 1 + int(rng() % 200);
        const double pa = double(rng() % 100) / 100.0, pb = double(rng() % 100) / 100.0;
        std::bernoulli_distribution ca(pa), cb(pb);
        std::vector<std::uint8_t> a(static_cast<std::size_t>(len)), b(static_cast<std::size_t>(len));
        long na = 0, nb = 0, both = 0;
        for (int i = 0; i < len; ++i) {
            a[std::size_t(i)] = ca(rng) ? 2 : 0;
            b[std::size_t(i)] = cb(rng) ? 2 : 0;
            na += a[std::size_t(i)] == 2;
            nb += b[std::size_t(i)] == 2;
            both += a[std::size_t(i)] == 2 && b[std::size_t(i)] == 2;
        }
        const LabelMap la = line(a), lb = line(b);
        const double d = dice(la, lb, 2);
        const double expect = na + nb == 0 ? 1.0 : 2.0 * double(both) / double(na + nb);
        bad += std::abs(d - expect) > 1e-12;
        bad += d != dice(lb, la, 2);
        bad += d < 0.0 || d > 1.0;
        bad += dice(la, la, 2) != 1.0;
    }
    const double dt = seconds_since(t0);
    return {bad == 0 && dt < 10.0, std::to_string(bad) + " violations over closed-form cases and 1000 random pairs, " +
                                       fmt("%.2f s", dt)};
}

// ---------------------------------------------------------------------------
// 4. reconstruction

Outcome reconstruction()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(4242);
    int exact = 0, per_level[3] = {0, 0, 0};
    for (int t = 0; t < 50; ++t) {
        Vec3i d, p;
        for (int a = 0; a < 3; ++a) {
            d[a] = 4 + int(rng() % 45);
            p[a] = 1 + int(rng() % std::uint64_t(d[a]));
        }
        const auto level = OverlapLevel(t % 3);
        Grid3<std::uint8_t> truth(d, 0);
        for (auto& v : truth.values()) v = std::uint8_t(rng() % 4);
        const auto plan = plan_grid(d, p, level);
        VoteGrid votes(d);
        for (const Vec3i& o : plan.origins) {
            Grid3<std::uint8_t> cut(p, 0);
            for (int z = 0; z < p[2]; ++z)
                for (int y = 0; y < p[1]; ++y)
                    for (int x = 0; x < p[0]; ++x) cut(x, y, z) = truth(o[0] + x, o[1] + y, o[2] + z);
            accumulate_votes(votes, o, cut);
        }
        const bool same = fuse_votes(votes).labels().values() == truth.values();
        exact += same;
        per_level[t % 3] += same;
    }
    const double dt = seconds_since(t0);
    std::ostringstream s;
    s << exact << "/50 bit-exact (null " << per_level[0] << ", medium " << per_level[1] << ", high " << per_level[2]
      << "), " << fmt("%.2f s", dt);
    return {exact == 50 && dt < 60.0, s.str()};
}

// ---------------------------------------------------------------------------
// 5. Wilcoxon

// Upper and lower tail counts over all 2^n sign assignments of the doubled
// mid-ranks.
std::pair<double, double> enumerate_tails(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    const std::size_t n = d.size();
    std::vector<long> r2(n);
    for (std::size_t i = 0; i < n; ++i) {
        long less = 0, eq = 0;
        for (double y : d) less += std::abs(y) < std::abs(d[i]), eq += std::abs(y) == std::abs(d[i]);
        r2[i] = 2 * less + eq + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0) w2 += r2[i];
    long up = 0, lo = 0;
    for (unsigned long m = 0; m < (1ul << n); ++m) {
        long s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (m >> i & 1) s += r2[i];
        up += s >= w2;
        lo += s <= w2;
    }
    const double all = std::ldexp(1.0, int(n));
    return {double(up) / all, double(lo) / all};
}

Outcome wilcoxon()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(12);
    int checked = 0, small = 0, bad = 0;
    for (int n = 1; n <= 12; ++n)
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                a[std::size_t(i)] = double(rng() % 7) / 3.0;
                b[std::size_t(i)] = double(rng() % 7) / 3.0;
            }
            const auto two = wilcoxon_signed_rank(a, b, Sided::TwoSided, WilcoxonMethod::Exact);
            if (two.n_effective < kMinPairs) {
                // below the minimum the contract is p = 1 with the flag set
                bad += !two.too_few_pairs || two.p_value != 1.0;
                ++small;
                continue;
            }
            const auto [up, lo] = enumerate_tails(a, b);
            bad += wilcoxon_signed_rank(a, b, Sided::Greater, WilcoxonMethod::Exact).p_value != up;
            bad += wilcoxon_signed_rank(a, b, Sided::Less, WilcoxonMethod::Exact).p_value != lo;
            bad += two.p_value != std::min(1.0, 2.0 * std::min(up, lo));
            ++checked;
        }
    // n = 10 without ties: W = 8 is the largest two-sided 5% rejection
    auto p_at = [](int w) {
        std::vector<double> a(10), b(10, 0.0);
        int left = w;
        for (int r = 10; r >= 1; --r) {
            const bool pos = r <= left;
            if (pos) left -= r;
            a[std::size_t(r - 1)] = pos ? r : -r;
        }
        return wilcoxon_signed_rank(a, b).p_value;
    };
    bool threshold = true;
    for (int w = 0; w <= 8; ++w) threshold &= p_at(w) <= 0.05;
    threshold &= p_at(9) > 0.05;
    const double dt = seconds_since(t0);
    std::ostringstream s;
    s << bad << " mismatches in " << checked << " enumerated samples (n 5..12) and " << small
      << " below the minimum n, n=10 W<=8 threshold "
      << (threshold ? "holds" : "fails") << fmt(" (p(8) = %.4f), ", p_at(8)) << fmt("%.2f s", dt);
    return {bad == 0 && checked > 100 && threshold && dt < 60.0, s.str()};
}

// ---------------------------------------------------------------------------
// Training helpers shared by 6-8

struct Recipe {
    Family family;
    Dimensionality dim;
    double width;
    int output;
    OverlapLevel train_overlap;
    double lr;
    int batch;
};

std::string name(const Recipe& r) { return std::string(to_string(r.family)) + " " + std::string(to_string(r.dim)); }

Model train_on(const Recipe& r, const Case& train, const Case& val)
{
    PatchConfig pc;
    pc.width_scale = r.width;
    pc.output_size = Vec3i{r.output, r.output, r.dim == Dimensionality::D3 ? r.output : 1};
    const auto spec = build_spec(r.family, r.dim, int(train.modality_count()), pc);
    Model m(spec, 1);
    auto samples = [&](const Case& c) {
        return extract_training_samples(c, plan_grid(c.dims(), spec.output_size, r.train_overlap), spec.input_size,
                                        spec.output_size);
    };
    TrainConfig cfg; // 20 epochs, patience 2
    cfg.learning_rate = r.lr;
    cfg.batch_size = r.batch;
    cfg.seed = 3;
    const auto ts = samples(train);
    if (&train == &val)
        train_model(m, ts, ts, cfg);
    else
        train_model(m, ts, samples(val), cfg);
    return m;
}

std::array<double, 3> dsc3(const Model& m, const Case& c, OverlapLevel level)
{
    const auto r = evaluate_case(*c.ground_truth(), segment_case(m, c, level));
    return {r.per_class.at(Tissue::CSF), r.per_class.at(Tissue::GM), r.per_class.at(Tissue::WM)};
}

std::string triple(const std::array<double, 3>& v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f/%.3f/%.3f", v[0], v[1], v[2]);
    return buf;
}

// ---------------------------------------------------------------------------
// 6. overfit one noise-free phantom

Outcome overfit()
{
    const auto t0 = Clock::now();
    using D = Dimensionality;
    // reduced widths and enlarged outputs keep CPU time in budget
    const Recipe recipes[] = {
        {Family::DM, D::D3, 0.125, 48, OverlapLevel::Null, 0.001, 1},
        {Family::KK, D::D3, 0.125, 48, OverlapLevel::Null, 0.003, 1},
        {Family::UNet, D::D3, 0.25, 32, OverlapLevel::Medium, 0.003, 2},
        {Family::UResNet, D::D3, 0.25, 32, OverlapLevel::Medium, 0.003, 2},
        {Family::DM, D::D2, 0.125, 48, OverlapLevel::Null, 0.001, 2},
        {Family::KK, D::D2, 0.125, 48, OverlapLevel::Null, 0.001, 2},
        {Family::UNet, D::D2, 0.25, 32, OverlapLevel::Medium, 0.003, 8},
        {Family::UResNet, D::D2, 0.25, 32, OverlapLevel::Medium, 0.003, 8},
    };
    const Case c = preprocess_case(generate_phantom(7, {64, 64, 64}, 0.0));
    int ok = 0;
    std::string detail;
    for (const auto& r : recipes) {
        const auto t1 = Clock::now();
        const Model m = train_on(r, c, c);
        const auto d = dsc3(m, c, OverlapLevel::High);
        const bool pass = *std::min_element(d.begin(), d.end()) > 0.90;
        ok += pass;
        detail += name(r) + " " + triple(d) + (pass ? "" : " (low)") + "; ";
        std::printf("      C6 %-12s CSF/GM/WM %s  %.0f s\n", name(r).c_str(), triple(d).c_str(), seconds_since(t1));
        std::fflush(stdout);
    }
    const double dt = seconds_since(t0);
    return {ok == 8 && dt < 1800.0,
            std::to_string(ok) + "/8 architectures above 0.90 on every class, " + fmt("%.0f s", dt)};
}

// ---------------------------------------------------------------------------
// 7. overlap fusion does not hurt on noisy phantoms

const Recipe kDesk2D[] = {
    {Family::DM, Dimensionality::D2, 0.125, 24, OverlapLevel::Medium, 0.001, 2},
    {Family::KK, Dimensionality::D2, 0.125, 24, OverlapLevel::Medium, 0.001, 2},
    {Family::UNet, Dimensionality::D2, 0.25, 32, OverlapLevel::Medium, 0.003, 8},
    {Family::UResNet, Dimensionality::D2, 0.25, 32, OverlapLevel::Medium, 0.003, 8},
};

Outcome overlap_non_degradation()
{
    const auto t0 = Clock::now();
    const double sigma = 2.0;
    const Vec3i dims{48, 48, 48};
    const Case train = preprocess_case(generate_phantom(7, dims, sigma));
    const Case val = preprocess_case(generate_phantom(8, dims, sigma));
    std::vector<Case> test;
    for (int k = 0; k < 4; ++k) test.push_back(preprocess_case(generate_phantom(101 + std::uint64_t(k), dims, sigma)));

    bool u_ok = false, valid_ok = false;
    std::string detail;
    for (const auto& r : kDesk2D) {
        const Model m = train_on(r, train, val);
        std::array<double, 3> null{}, high{};
        for (const auto& c : test) {
            const auto a = dsc3(m, c, OverlapLevel::Null), b = dsc3(m, c, OverlapLevel::High);
            for (int k = 0; k < 3; ++k) {
                null[std::size_t(k)] += a[std::size_t(k)] / 4;
                high[std::size_t(k)] += b[std::size_t(k)] / 4;
            }
        }
        bool pass = true;
        for (int k = 0; k < 3; ++k) pass &= high[std::size_t(k)] >= null[std::size_t(k)] - 0.01;
        (is_u_shaped(r.family) ? u_ok : valid_ok) |= pass;
        std::printf("      C7 %-12s null %s  high %s  %s\n", name(r).c_str(), triple(null).c_str(),
                    triple(high).c_str(), pass ? "ok" : "degraded");
        std::fflush(stdout);
    }
    const double dt = seconds_since(t0);
    std::ostringstream s;
    s << "u-shaped " << (u_ok ? "ok" : "degraded") << ", valid-conv " << (valid_ok ? "ok" : "degraded")
      << fmt(", sigma %.1f", sigma) << ", " << fmt("%.0f s", dt);
    return {u_ok && valid_ok, s.str()};
}

// ---------------------------------------------------------------------------
// 8. two modalities beat either one alone where only the pair separates

Outcome modality_benefit()
{
    const auto t0 = Clock::now();
    const Vec3i dims{48, 48, 48};
    const double sigma = 0.1;
    auto make = [&](std::uint64_t seed, int use) {
        Case c = generate_phantom(seed, dims, sigma, 2);
        if (use >= 0) c = c.select_modalities({use});
        return preprocess_case(c);
    };
    int families = 0;
    for (const auto& r : kDesk2D) {
        std::array<double, 3> gm{}, csf{}; // dual, channel 0, channel 1
        for (int use = -1; use <= 1; ++use) {
            const Model m = train_on(r, make(7, use), make(8, use));
            for (int k = 0; k < 4; ++k) {
                const auto d = dsc3(m, make(101 + std::uint64_t(k), use), OverlapLevel::Null);
                csf[std::size_t(use + 1)] += d[0] / 4;
                gm[std::size_t(use + 1)] += d[1] / 4;
            }
        }
        const double gain = gm[0] - std::max(gm[1], gm[2]);
        families += gain >= 0.05;
        std::printf("      C8 %-12s GM dual %.3f single %.3f/%.3f (gain %+.3f)  CSF dual %.3f single %.3f/%.3f\n",
                    name(r).c_str(), gm[0], gm[1], gm[2], gain, csf[0], csf[1], csf[2]);
        std::fflush(stdout);
    }
    const double dt = seconds_since(t0);
    return {families >= 2,
            std::to_string(families) + "/4 families gain >= 0.05 GM DSC from the second modality, " +
                fmt("%.0f s", dt)};
}

// ---------------------------------------------------------------------------
// 9. gradients of a two-layer network

Outcome gradient_check()
{
    const auto t0 = Clock::now();
    ArchitectureSpec spec;
    spec.family = Family::DM;
    spec.dimensionality = Dimensionality::D3;
    spec.in_channels = 2;
    spec.input_size = {5, 5, 5};
    spec.output_size = {3, 3, 3};
    LayerSpec in;
    in.id = "input";
    in.kind = LayerKind::Input;
    in.channels_out = 2;
    LayerSpec conv;
    conv.id = "conv";
    conv.kind = LayerKind::Conv;
    conv.kernel = {3, 3, 3};
    conv.channels_out = 3;
    conv.inputs = {"input"};
    LayerSpec act;
    act.id = "act";
    act.kind = LayerKind::Activation;
    act.activation = ActivationKind::PReLU;
    act.inputs = {"conv"};
    LayerSpec head;
    head.id = "softmax_head";
    head.kind = LayerKind::SoftmaxHead;
    head.channels_out = 4;
    head.inputs = {"act"};
    spec.layers = {in, conv, act, head};
    validate_spec(spec);

    Model m(spec, 5);
    std::mt19937_64 rng(8);
    std::normal_distribution<float> g(0.f, 1.f);
    nn::Tensor x(2, 2, spec.input_size);
    for (float& v : x.data) v = g(rng);
    // slopes away from 0.25 so their gradient is not trivially tied to the conv
    for (auto& p : m.parameters())
        if (p.name.ends_with("/alpha"))
            for (float& v : p.value) v = 0.1f + 0.5f * std::abs(g(rng));
    std::vector<std::uint8_t> t(2 * 27);
    std::vector<float> w(2 * 27);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = std::uint8_t(rng() % 4);
        w[i] = t[i] ? 1.f : 0.f;
    }
    auto loss = [&](Model& mm) { return weighted_loss_gradient(mm.forward_train(x).logits(), t, w)->loss; };

    m.zero_grad();
    const auto trace = m.forward_train(x);
    m.backward(trace, weighted_loss_gradient(trace.logits(), t, w)->grad);

    // central differences per parameter; coordinates whose step would move a
    // pre-activation across the PReLU kink are skipped and counted
    const double eps = 3e-3;
    double worst = 0.0, diff2 = 0.0, norm2 = 0.0;
    int checked = 0, kinks = 0;
    const auto base = m.forward_train(x);
    for (std::size_t pi = 0; pi < m.parameters().size(); ++pi)
        for (std::size_t i = 0; i < m.parameters()[pi].value.size(); ++i) {
            Model a = m, b = m;
            a.parameters()[pi].value[i] += float(eps);
            b.parameters()[pi].value[i] -= float(eps);
            // skip coordinates whose perturbation flips a pre-activation sign
            auto signs = [](const Model::Trace& tr) {
                std::vector<bool> s;
                for (float v : tr.outputs[1].data) s.push_back(v < 0.f);
                return s;
            };
            const auto ta = a.forward_train(x), tb = b.forward_train(x);
            if (signs(ta) != signs(base) || signs(tb) != signs(base)) {
                ++kinks;
                continue;
            }
            const double fd = (loss(a) - loss(b)) / (2 * eps);
            const double an = m.parameters()[pi].grad[i];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
            worst = std::max(worst, rel);
            diff2 += (fd - an) * (fd - an);
            norm2 += an * an;
            ++checked;
        }
    const double dt = seconds_since(t0);
    std::ostringstream s;
    // float32 rounding puts a floor of a few 1e-6 under each difference, so
    // the criterion is the norm-wise error of the whole gradient; the worst
    // single coordinate is reported alongside
    const double rel = std::sqrt(diff2 / norm2);
    s << "relative error " << fmt("%.2e", rel) << " over " << checked << " parameters (worst coordinate "
      << fmt("%.2e", worst) << ", " << kinks << " skipped at a kink), " << fmt("%.2f s", dt);
    return {rel < 1e-3 && checked > 0 && kinks * 10 < checked, s.str()};
}

// ---------------------------------------------------------------------------
// 10. determinism

Outcome determinism()
{
    const auto t0 = Clock::now();
    const nlohmann::json j = {
        {"study", "single_run"},
        {"families", {"UNet", "KK"}},
        {"dims", {"2D"}},
        {"overlap_train", "medium"},
        {"overlap_test", "medium"},
        {"dataset", {{"phantom", {{"count", 3}, {"dims", {32, 32, 32}}, {"noise_sigma", 0.5}, {"modalities", 1}, {"seed", 2}}}}},
        {"evaluation", {{"scheme", "loocv"}}},
        {"train", {{"max_epochs", 2}, {"val_fraction", 0.5}, {"batch_size", 4}, {"learning_rate", 0.003}}},
        {"patch", {{"width_scale", 0.125}, {"overrides", {{"KK", {{"output_size", {24, 24, 1}}}}}}}},
        {"seed", 17},
    };
    const ExperimentConfig cfg = experiment_config_from_json(j);
    const fs::path root = fs::temp_directory_path() / "tissueseg_acceptance_det";
    fs::remove_all(root);
    auto run = [&](const std::string& sub) {
        emit_report(run_experiment(cfg), root / sub);
        std::ifstream f(root / sub / "metrics.csv", std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    const std::string a = run("a"), b = run("b");
    const long rows = long(std::count(a.begin(), a.end(), '\n'));
    fs::remove_all(root);
    const double dt = seconds_since(t0);
    std::ostringstream s;
    s << "metrics.csv " << (a == b ? "byte-identical" : "differs") << " across two runs (" << a.size() << " bytes, "
      << rows << " lines), " << fmt("%.0f s", dt);
    return {a == b && rows > 1, s.str()};
}

} // namespace

int main(int argc, char** argv)
{
    struct Criterion {
        int id;
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "patch counts on a 256^3 grid", patch_counts},
        {2, "parameter counts vs reference table", parameter_counts},
        {3, "DSC formula and invariants", dsc_suite},
        {4, "patch fusion reconstructs labels", reconstruction},
        {5, "exact Wilcoxon p-values", wilcoxon},
        {6, "overfit one phantom, all 8 architectures", overfit},
        {7, "high-overlap testing does not degrade DSC", overlap_non_degradation},
        {8, "second modality separates GM from CSF", modality_benefit},
        {9, "finite-difference gradient check", gradient_check},
        {10, "byte-identical metrics on rerun", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  C%-2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
