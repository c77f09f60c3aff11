#include "tissueseg/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tseg {

std::string_view to_string(Sided s)
{
    switch (s) {
    case Sided::TwoSided: return "two-sided";
    case Sided::Greater: return "greater";
    case Sided::Less: return "less";
    }
    return "two-sided";
}

Sided sided_from_string(std::string_view s)
{
    if (s == "two-sided") return Sided::TwoSided;
    if (s == "greater") return Sided::Greater;
    if (s == "less") return Sided::Less;
    throw std::invalid_argument("unknown alternative '" + std::string(s) + "'");
}

std::string_view to_string(WilcoxonMethod m)
{
    return m == WilcoxonMethod::Exact ? "exact" : "normal_approximation";
}

nlohmann::json to_json(const SignificanceResult& r)
{
    return {{"statistic", r.statistic},
            {"p_value", r.p_value},
            {"n_effective", r.n_effective},
            {"method", to_string(r.method)},
            {"too_few_pairs", r.too_few_pairs}};
}

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

} // namespace

SignificanceResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b, Sided sided,
                                        std::optional<WilcoxonMethod> force)
{
    if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);

    SignificanceResult r;
    const int n = int(d.size());
    r.n_effective = n;
    r.method = force.value_or(n <= kExactLimit ? WilcoxonMethod::Exact : WilcoxonMethod::NormalApproximation);

    // doubled mid-ranks are integers
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
    std::vector<long> rank2(d.size());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const long r2 = long(i + 1) + long(j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = double(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) w2 += rank2[i];
    r.statistic = double(w2) / 2.0;

    if (n < kMinPairs) {
        r.too_few_pairs = true;
        r.p_value = 1.0;
        return r;
    }

    double p_upper, p_lower; // P(W >= w), P(W <= w)
    if (r.method == WilcoxonMethod::Exact) {
        const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
        std::vector<double> count(std::size_t(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (long rk : rank2) {
            for (long s = reach; s >= 0; --s) count[std::size_t(s + rk)] += count[std::size_t(s)];
            reach += rk;
        }
        const double all = std::ldexp(1.0, n);
        double upper = 0.0, lower = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s >= w2) upper += count[std::size_t(s)];
            if (s <= w2) lower += count[std::size_t(s)];
        }
        p_upper = upper / all;
        p_lower = lower / all;
    } else {
        const double nn = n;
        const double mean = nn * (nn + 1) / 4.0;
        const double sd = std::sqrt(nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0);
        p_upper = normal_sf((r.statistic - mean - 0.5) / sd);
        p_lower = 1.0 - normal_sf((r.statistic - mean + 0.5) / sd);
    }
    switch (sided) {
    case Sided::Greater: r.p_value = p_upper; break;
    case Sided::Less: r.p_value = p_lower; break;
    case Sided::TwoSided: r.p_value = 2.0 * std::min(p_upper, p_lower); break;
    }
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
    return r;
}

} // namespace tseg
