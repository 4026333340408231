#include "dsmedian/allocation.hpp"

#include "dsmedian/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dsmedian {

void CostModel::validate() const {
    for (double c : {C0, C1, C2, C3}) {
        if (!std::isfinite(c)) throw InvalidInput("costs must be finite");
    }
    if (!(C0 > 0.0 && C1 > 0.0 && C2 > 0.0 && C3 >= 0.0))
        throw InvalidInput("costs require C0, C1, C2 > 0 and C3 >= 0");
}

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Single: return "single";
    case Strategy::H: return "H";
    case Strategy::G: return "g";
    case Strategy::F: return "F";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "single") return Strategy::Single;
    if (name == "H" || name == "h") return Strategy::H;
    if (name == "g" || name == "G") return Strategy::G;
    if (name == "F" || name == "f") return Strategy::F;
    throw InvalidInput("unknown strategy '" + std::string(name) + "' (single, H, g, F)");
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Gain: return "gain";
    case Verdict::NoGain: return "no gain";
    case Verdict::Loss: return "loss";
    case Verdict::NotComparable: return "not comparable";
    }
    return "?";
}

namespace {

double first_phase_unit_cost(Strategy s, const CostModel& cost) {
    return s == Strategy::H ? cost.C2 : cost.C2 + cost.C3;
}

}  // namespace

double strategy_cost(Strategy s, const CostModel& cost, double m, double n) {
    if (s == Strategy::Single) return cost.C1 * m;
    return cost.C1 * m + first_phase_unit_cost(s, cost) * n;
}

double strategy_variance(Strategy s, const VarianceComponents& comps, std::size_t m, std::size_t n, std::size_t N) {
    switch (s) {
    case Strategy::Single: return var_sample_median(DesignSizes{m, m, N}, comps);
    case Strategy::H: return min_var_H(DesignSizes{m, n, N}, comps);
    case Strategy::G: return min_var_g(DesignSizes{m, n, N}, comps);
    case Strategy::F: return min_var_F(DesignSizes{m, n, N}, comps);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

namespace {

constexpr double kSlack = 1e-9;

AllocationResult infeasible(Strategy s, std::string reason) {
    AllocationResult r;
    r.strategy = s;
    r.feasible = false;
    r.reason = std::move(reason);
    r.opt_variance = r.opt_variance_large_n = r.int_variance = std::numeric_limits<double>::quiet_NaN();
    return r;
}

// Minimizes a/m + b/n subject to C1 m + c n = C0 (Lagrange):
//   m = C0 sqrt(a/C1) / K,  n = C0 sqrt(b/c) / K,  K = sqrt(a C1) + sqrt(b c),
// with minimum K^2 / C0. `finite_term` is the constant subtracted for finite N.
AllocationResult two_phase_optimum(Strategy s, const CostModel& cost, const VarianceComponents& comps,
                                   std::size_t N, double a, double b, double finite_term) {
    const double c = first_phase_unit_cost(s, cost);
    const double K = std::sqrt(a * cost.C1) + std::sqrt(b * c);
    AllocationResult r;
    r.strategy = s;
    r.m_real = cost.C0 * std::sqrt(a / cost.C1) / K;
    r.n_real = cost.C0 * std::sqrt(b / c) / K;
    r.opt_variance_large_n = K * K / cost.C0;
    r.opt_variance = r.opt_variance_large_n - finite_term;

    const double m_round = std::round(r.m_real);
    if (m_round < 2.0) {
        r.reason = "second-phase size below 2 (all budget goes to the first phase)";
        r.int_variance = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.m_int = static_cast<std::size_t>(m_round);
    const double n_budget = std::floor((cost.C0 - cost.C1 * m_round) / c + kSlack);
    r.n_int = n_budget < 0.0 ? 0 : std::min(static_cast<std::size_t>(n_budget), N);
    if (!(r.m_real < r.n_real)) {
        r.reason = "continuous optimum has m >= n";
    } else if (r.n_real > static_cast<double>(N) * (1.0 + kSlack)) {
        r.reason = "first-phase size exceeds N";
    } else if (!(r.n_int > r.m_int)) {
        r.reason = "rounded design has n <= m";
    } else {
        r.feasible = true;
    }
    r.int_variance = r.feasible ? strategy_variance(s, comps, r.m_int, r.n_int, N)
                                : std::numeric_limits<double>::quiet_NaN();
    return r;
}

void check_inputs(const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    cost.validate();
    if (!(comps.V0 > 0.0) || !std::isfinite(comps.V0)) throw InvalidInput("V0 must be positive");
    if (comps.V1 < 0.0 || comps.V2 < 0.0 || comps.V3 < 0.0) throw InvalidInput("variance components must be >= 0");
    if (N < 2) throw InvalidInput("population size must be at least 2");
}

}  // namespace

AllocationResult allocate_single(const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    check_inputs(cost, comps, N);
    if (cost.C0 < cost.C1) return infeasible(Strategy::Single, "budget below the cost of one unit");
    AllocationResult r;
    r.strategy = Strategy::Single;
    r.m_real = cost.C0 / cost.C1;
    r.n_real = r.m_real;
    r.opt_variance_large_n = comps.V0 * cost.C1 / cost.C0;
    r.opt_variance = comps.V0 * (cost.C1 / cost.C0 - 1.0 / static_cast<double>(N));
    if (r.m_real > static_cast<double>(N) * (1.0 + kSlack)) {
        r.reason = "budget exceeds a census";
        r.int_variance = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.m_int = std::min(static_cast<std::size_t>(std::floor(r.m_real + kSlack)), N);
    r.n_int = r.m_int;
    r.feasible = true;
    r.int_variance = strategy_variance(Strategy::Single, comps, r.m_int, r.n_int, N);
    return r;
}

AllocationResult allocate_H(const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    check_inputs(cost, comps, N);
    if (!(comps.V1 > 0.0))
        return infeasible(Strategy::H, "V1 = 0: x carries no information, use single-phase sampling");
    if (!(comps.V0 > comps.V1)) return infeasible(Strategy::H, "requires V0 > V1");
    const double Nd = static_cast<double>(N);
    return two_phase_optimum(Strategy::H, cost, comps, N, comps.V0 - comps.V1, comps.V1, comps.V0 / Nd);
}

AllocationResult allocate_g(const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    check_inputs(cost, comps, N);
    if (!(comps.V0 > comps.V1)) return infeasible(Strategy::G, "requires V0 > V1");
    if (!(comps.V1 > comps.V2)) return infeasible(Strategy::G, "second auxiliary removes first-phase value (V1 <= V2)");
    const double Nd = static_cast<double>(N);
    return two_phase_optimum(Strategy::G, cost, comps, N, comps.V0 - comps.V1, comps.V1 - comps.V2,
                             (comps.V0 - comps.V2) / Nd);
}

AllocationResult allocate_F(const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    check_inputs(cost, comps, N);
    if (!(comps.V0 > comps.V1 + comps.V3)) return infeasible(Strategy::F, "requires V0 > V1 + V3");
    if (!(comps.V1 + comps.V3 > comps.V2)) return infeasible(Strategy::F, "requires V1 + V3 > V2");
    const double Nd = static_cast<double>(N);
    return two_phase_optimum(Strategy::F, cost, comps, N, comps.V0 - comps.V1 - comps.V3,
                             comps.V1 - comps.V2 + comps.V3, (comps.V0 - comps.V2) / Nd);
}

AllocationResult allocate(Strategy s, const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    switch (s) {
    case Strategy::Single: return allocate_single(cost, comps, N);
    case Strategy::H: return allocate_H(cost, comps, N);
    case Strategy::G: return allocate_g(cost, comps, N);
    case Strategy::F: return allocate_F(cost, comps, N);
    }
    throw InvalidInput("unknown strategy");
}

AllocationResult grid_search_allocation(const CostModel& cost, const VarianceComponents& comps, std::size_t N,
                                        Strategy s) {
    check_inputs(cost, comps, N);
    constexpr double kMaxPoints = 2e8;
    const double m_cap = std::floor(cost.C0 / cost.C1 + kSlack);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_m = 0, best_n = 0;

    if (s == Strategy::Single) {
        const auto m_max = static_cast<std::size_t>(std::min(m_cap, static_cast<double>(N)));
        for (std::size_t m = 1; m <= m_max; ++m) {
            const double v = strategy_variance(s, comps, m, m, N);
            if (v < best) {
                best = v;
                best_m = best_n = m;
            }
        }
    } else {
        const double c = first_phase_unit_cost(s, cost);
        const double n_cap = std::min(std::floor(cost.C0 / c + kSlack), static_cast<double>(N));
        if (m_cap * n_cap > kMaxPoints) throw InvalidInput("grid too large for exhaustive search");
        for (std::size_t m = 2; static_cast<double>(m) <= m_cap; ++m) {
            const double n_budget = std::floor((cost.C0 - cost.C1 * static_cast<double>(m)) / c + kSlack);
            const double n_hi = std::min(n_budget, static_cast<double>(N));
            for (std::size_t n = m + 1; static_cast<double>(n) <= n_hi; ++n) {
                const double v = strategy_variance(s, comps, m, n, N);
                if (v < best) {
                    best = v;
                    best_m = m;
                    best_n = n;
                }
            }
        }
    }
    if (best_m == 0) return infeasible(s, "no feasible integer design within budget");
    AllocationResult r;
    r.strategy = s;
    r.m_int = best_m;
    r.n_int = best_n;
    r.m_real = static_cast<double>(best_m);
    r.n_real = static_cast<double>(best_n);
    r.opt_variance = r.int_variance = best;
    const double Nd = static_cast<double>(N);
    const double finite = s == Strategy::Single || s == Strategy::H ? comps.V0 / Nd : (comps.V0 - comps.V2) / Nd;
    r.opt_variance_large_n = best + finite;
    r.feasible = true;
    return r;
}

namespace {

Verdict compare(const AllocationResult& challenger, const AllocationResult& baseline) {
    if (!challenger.feasible || !baseline.feasible) return Verdict::NotComparable;
    const double a = challenger.opt_variance_large_n;
    const double b = baseline.opt_variance_large_n;
    if (std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b))) return Verdict::NoGain;
    return a < b ? Verdict::Gain : Verdict::Loss;
}

Comparison make(std::string name, const AllocationResult& ch, const AllocationResult& base, double lhs, double rhs) {
    Comparison c;
    c.name = std::move(name);
    c.challenger = ch.strategy;
    c.baseline = base.strategy;
    c.verdict = compare(ch, base);
    c.challenger_variance = ch.opt_variance_large_n;
    c.baseline_variance = base.opt_variance_large_n;
    c.closed_lhs = lhs;
    c.closed_rhs = rhs;
    c.closed_available = std::isfinite(lhs) && std::isfinite(rhs);
    c.closed_holds = c.closed_available && lhs < rhs;
    return c;
}

double safe_sqrt(double v) { return v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

ProfitabilityReport profitability_report(const CostModel& cost, const VarianceComponents& comps, std::size_t N) {
    ProfitabilityReport rep;
    rep.single = allocate_single(cost, comps, N);
    rep.H = allocate_H(cost, comps, N);
    rep.g = allocate_g(cost, comps, N);
    rep.F = allocate_F(cost, comps, N);
    rep.cost_ordering_holds = cost.ordering_holds();

    const double V0 = comps.V0, V1 = comps.V1, V2 = comps.V2, V3 = comps.V3;
    const double c = cost.C2 + cost.C3;
    const double ratio = c / cost.C1;
    const double A = V0 - V1;
    const double B = V1 - V2;
    auto sq = [](double t) { return t * t; };

    // Large-N conditions obtained by comparing the K^2 / C0 optima directly.
    rep.comparisons.push_back(make("g-vs-single", rep.g, rep.single, ratio,
                                   sq(std::sqrt(V0) - safe_sqrt(A)) / B));
    rep.comparisons.push_back(make("g-vs-H", rep.g, rep.H, c / cost.C2, V1 / B));
    rep.comparisons.push_back(make("F-vs-single", rep.F, rep.single, ratio,
                                   sq((std::sqrt(V0) - safe_sqrt(A - V3)) / safe_sqrt(B + V3))));
    rep.comparisons.push_back(make("F-vs-H", rep.F, rep.H,
                                   safe_sqrt((A - V3) * cost.C1) + safe_sqrt((B + V3) * c),
                                   safe_sqrt(A * cost.C1) + safe_sqrt(V1 * cost.C2)));
    rep.comparisons.push_back(make("F-vs-g", rep.F, rep.g, ratio,
                                   sq((safe_sqrt(A) - safe_sqrt(A - V3)) / (safe_sqrt(B + V3) - safe_sqrt(B)))));
    return rep;
}

}  // namespace dsmedian
