#pragma once

#include "dsmedian/variance_theory.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dsmedian {

/// C0: total budget. C1: per-unit cost of y (second phase). C2, C3: per-unit
/// costs of x and z (first phase). Survey cost is C1 m + (C2 + C3) n with
/// both auxiliaries, C1 m + C2 n with x only, C1 m without auxiliaries.
struct CostModel {
    double C0 = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double C3 = 0.0;

    /// Throws InvalidInput unless C0, C1, C2 > 0 and C3 >= 0 (all finite).
    void validate() const;
    /// The customary ordering C1 > C2 > C3; reported, not required.
    bool ordering_holds() const { return C1 > C2 && C2 > C3; }
};

enum class Strategy { Single, H, G, F };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

/// Cost of an (m, n) design under the strategy.
double strategy_cost(Strategy s, const CostModel& cost, double m, double n);

/// First-order minimum variance of the strategy's estimator class at (m, n).
/// For Single, n is ignored.
double strategy_variance(Strategy s, const VarianceComponents& comps, std::size_t m, std::size_t n, std::size_t N);

struct AllocationResult {
    Strategy strategy = Strategy::Single;
    double m_real = 0.0;
    double n_real = 0.0;
    std::size_t m_int = 0;
    std::size_t n_int = 0;
    double opt_variance = 0.0;          // at (m_real, n_real), finite-N terms kept
    double opt_variance_large_n = 0.0;  // same without the 1/N terms
    double int_variance = 0.0;          // at (m_int, n_int) when feasible
    bool feasible = false;
    std::string reason;  // why not feasible
};

AllocationResult allocate_single(const CostModel& cost, const VarianceComponents& comps, std::size_t N);
AllocationResult allocate_H(const CostModel& cost, const VarianceComponents& comps, std::size_t N);
AllocationResult allocate_g(const CostModel& cost, const VarianceComponents& comps, std::size_t N);
AllocationResult allocate_F(const CostModel& cost, const VarianceComponents& comps, std::size_t N);
AllocationResult allocate(Strategy s, const CostModel& cost, const VarianceComponents& comps, std::size_t N);

/// Exhaustive search over integer designs 2 <= m < n <= N (1 <= m <= N for
/// Single) within budget, minimizing strategy_variance. Independent of the
/// closed forms; desk-scale only (throws InvalidInput past ~2e8 points).
AllocationResult grid_search_allocation(const CostModel& cost, const VarianceComponents& comps, std::size_t N,
                                        Strategy s);

enum class Verdict { Gain, NoGain, Loss, NotComparable };

std::string_view to_string(Verdict v);

/// One strategy against another at their respective optima (large N).
struct Comparison {
    std::string name;  // e.g. "g-vs-single"
    Strategy challenger = Strategy::G;
    Strategy baseline = Strategy::Single;
    Verdict verdict = Verdict::NotComparable;
    double challenger_variance = 0.0;
    double baseline_variance = 0.0;
    // Closed-form inequality (challenger wins iff lhs < rhs), for traceability.
    double closed_lhs = 0.0;
    double closed_rhs = 0.0;
    bool closed_available = false;
    bool closed_holds = false;
};

struct ProfitabilityReport {
    AllocationResult single, H, g, F;
    std::vector<Comparison> comparisons;
    bool cost_ordering_holds = false;
};

/// Verdicts are decided by comparing large-N optimal variances numerically.
ProfitabilityReport profitability_report(const CostModel& cost, const VarianceComponents& comps, std::size_t N);

}  // namespace dsmedian
