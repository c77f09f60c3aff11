#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tseg {

/// Greater: H1 is a > b. Less: H1 is a < b.
enum class Sided { TwoSided, Greater, Less };
enum class WilcoxonMethod { Exact, NormalApproximation };

std::string_view to_string(Sided s);
Sided sided_from_string(std::string_view s);
std::string_view to_string(WilcoxonMethod m);

inline constexpr int kExactLimit = 25;
inline constexpr int kMinPairs = 5;
inline constexpr double kSignificanceLevel = 0.01;

struct SignificanceResult {
    double statistic = 0.0; ///< W, sum of ranks of positive differences
    double p_value = 1.0;
    int n_effective = 0;    ///< pairs left after dropping zero differences
    WilcoxonMethod method = WilcoxonMethod::Exact;
    bool too_few_pairs = false;
};

nlohmann::json to_json(const SignificanceResult& r);

/// Signed-rank test on d = a - b with mid-ranks for tied |d|. Exact null
/// distribution for n <= 25 (or when forced), normal approximation with tie
/// and continuity correction otherwise. Fewer than 5 non-zero differences
/// give p = 1 and too_few_pairs. Throws std::invalid_argument on length
/// mismatch.
SignificanceResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                        Sided sided = Sided::TwoSided,
                                        std::optional<WilcoxonMethod> force = std::nullopt);

} // namespace tseg
