#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "tissueseg/wilcoxon.hpp"

using namespace tseg;

namespace {

struct Brute {
    double upper, lower;
    double w;
};

// Enumerates all 2^n sign patterns of the doubled mid-ranks of |d|.
Brute brute_force(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    const std::size_t n = d.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return std::abs(d[x]) < std::abs(d[y]); });
    std::vector<long> rank2(n); // 2 * mid-rank
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
        for (std::size_t k = i; k <= j; ++k) rank2[idx[k]] = long(i + j + 2);
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0) w2 += rank2[i];
    long up = 0, lo = 0;
    for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
        long s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) s += rank2[i];
        up += s >= w2;
        lo += s <= w2;
    }
    const double all = std::ldexp(1.0, int(n));
    return {double(up) / all, double(lo) / all, double(w2) / 2.0};
}

} // namespace

TEST_CASE("exact p-values equal brute-force enumeration for every n up to 12")
{
    std::mt19937_64 rng(2024);
    for (int n = 5; n <= 12; ++n)
        for (int trial = 0; trial < 15; ++trial) {
            std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                // coarse values force ties and occasional zero differences
                a[std::size_t(i)] = double(rng() % 9) / 4.0;
                b[std::size_t(i)] = double(rng() % 9) / 4.0;
            }
            const Brute bf = brute_force(a, b);
            const auto two = wilcoxon_signed_rank(a, b, Sided::TwoSided, WilcoxonMethod::Exact);
            if (two.too_few_pairs) continue;
            CHECK(two.statistic == bf.w);
            CHECK(wilcoxon_signed_rank(a, b, Sided::Greater, WilcoxonMethod::Exact).p_value == bf.upper);
            CHECK(wilcoxon_signed_rank(a, b, Sided::Less, WilcoxonMethod::Exact).p_value == bf.lower);
            CHECK(two.p_value == std::min(1.0, 2.0 * std::min(bf.upper, bf.lower)));
        }
}

TEST_CASE("n = 10 critical value for a two-sided 5% test is W = 8")
{
    // differences with ranks 1..10; the positive ones sum to the chosen W
    auto with_w = [](int w) {
        std::vector<double> a(10), b(10, 0.0);
        int remaining = w;
        for (int r = 10; r >= 1; --r) {
            const bool pos = r <= remaining;
            if (pos) remaining -= r;
            a[std::size_t(r - 1)] = pos ? r : -r;
        }
        return wilcoxon_signed_rank(a, b);
    };
    CHECK(with_w(8).statistic == 8);
    CHECK(with_w(8).p_value == doctest::Approx(50.0 / 1024.0));
    CHECK(with_w(8).p_value <= 0.05);
    CHECK(with_w(9).p_value > 0.05);
    CHECK(with_w(0).p_value == doctest::Approx(2.0 / 1024.0));
}

TEST_CASE("one-sided alternatives point the right way")
{
    const std::vector<double> hi{0.91, 0.92, 0.93, 0.94, 0.95, 0.96}, lo{0.90, 0.90, 0.90, 0.90, 0.90, 0.90};
    CHECK(wilcoxon_signed_rank(hi, lo, Sided::Greater).p_value == doctest::Approx(1.0 / 64));
    CHECK(wilcoxon_signed_rank(hi, lo, Sided::Less).p_value == 1.0);
    CHECK(wilcoxon_signed_rank(hi, lo).p_value == doctest::Approx(2.0 / 64));
    CHECK(wilcoxon_signed_rank(hi, lo).method == WilcoxonMethod::Exact);
}

TEST_CASE("too few pairs and bad input")
{
    const auto r = wilcoxon_signed_rank({1, 2, 3, 4, 5, 6}, {1, 2, 0, 0, 0, 0});
    CHECK(r.n_effective == 4);
    CHECK(r.too_few_pairs);
    CHECK(r.p_value == 1.0);
    CHECK_THROWS_AS(wilcoxon_signed_rank({1, 2}, {1}), std::invalid_argument);
    CHECK(sided_from_string("greater") == Sided::Greater);
    CHECK_THROWS(sided_from_string("bigger"));
}

TEST_CASE("normal approximation with tie and continuity correction")
{
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.2, 1.0);
    std::vector<double> a(40), b(40, 0.0);
    for (double& x : a) x = std::round(g(rng) * 4) / 4; // ties
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.method == WilcoxonMethod::NormalApproximation);

    // independent evaluation of the same formula
    std::vector<double> d;
    for (double x : a)
        if (x != 0) d.push_back(x);
    const double n = double(d.size());
    std::vector<double> abs_d;
    for (double x : d) abs_d.push_back(std::abs(x));
    double w = 0, tie = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double less = 0, eq = 0;
        for (double y : abs_d) less += y < abs_d[i], eq += y == abs_d[i];
        if (d[i] > 0) w += less + (eq + 1) / 2;
    }
    std::vector<double> sorted = abs_d;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = double(j - i);
        tie += t * t * t - t;
        i = j;
    }
    const double mean = n * (n + 1) / 4, sd = std::sqrt(n * (n + 1) * (2 * n + 1) / 24 - tie / 48);
    const double z = (std::abs(w - mean) - 0.5) / sd;
    const double p = std::erfc(z / std::sqrt(2.0));
    CHECK(r.statistic == doctest::Approx(w));
    CHECK(r.p_value == doctest::Approx(p).epsilon(1e-9));

    // exact and approximate agree roughly at moderate n
    std::vector<double> a2(20), b2(20, 0.0);
    for (std::size_t i = 0; i < 20; ++i) a2[i] = (i % 3 == 0 ? -1.0 : 1.0) * double(i + 1);
    const double pe = wilcoxon_signed_rank(a2, b2, Sided::TwoSided, WilcoxonMethod::Exact).p_value;
    const double pn = wilcoxon_signed_rank(a2, b2, Sided::TwoSided, WilcoxonMethod::NormalApproximation).p_value;
    CHECK(std::abs(pe - pn) < 0.01);
}
