#include "dsmedian/allocation.hpp"
#include "dsmedian/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsmedian;
using dsmedian::testing::rel_diff;
using dsmedian::testing::uniform;

namespace {

constexpr std::size_t kLargeN = 1'000'000'000;

VarianceComponents comps(double V0, double V1, double V2, double V3 = 0.0) { return {V0, V1, V2, V3}; }

// Continuous first-order variance of the strategy at real (m, n), large N.
double continuous_variance(Strategy s, const VarianceComponents& v, double m, double n) {
    switch (s) {
    case Strategy::Single: return v.V0 / m;
    case Strategy::H: return v.V0 / m - (1 / m - 1 / n) * v.V1;
    case Strategy::G: return v.V0 / m - (1 / m - 1 / n) * v.V1 - v.V2 / n;
    case Strategy::F: return v.V0 / m - (1 / m - 1 / n) * (v.V1 + v.V3) - v.V2 / n;
    }
    return NAN;
}

// Golden-section search for the best m on the budget line; the objective is
// convex in m there.
std::pair<double, double> golden_optimum(Strategy s, const CostModel& c, const VarianceComponents& v) {
    const double cn = s == Strategy::H ? c.C2 : c.C2 + c.C3;
    auto f = [&](double m) { return continuous_variance(s, v, m, (c.C0 - c.C1 * m) / cn); };
    double lo = 1e-9 * c.C0 / c.C1, hi = c.C0 / c.C1 * (1 - 1e-12);
    const double phi = (std::sqrt(5.0) - 1) / 2;
    for (int i = 0; i < 300; ++i) {
        const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
        if (f(a) < f(b)) hi = b;
        else lo = a;
    }
    const double m = (lo + hi) / 2;
    return {m, f(m)};
}

CostModel random_cost(CounterRng& rng) {
    CostModel c;
    c.C1 = uniform(rng, 1, 10);
    c.C2 = c.C1 * uniform(rng, 0.1, 0.9);
    c.C3 = c.C2 * uniform(rng, 0, 0.9);
    c.C0 = c.C1 * uniform(rng, 40, 200);
    return c;
}

VarianceComponents random_comps(CounterRng& rng) {
    return variance_components(dsmedian::testing::random_association(rng));
}

}  // namespace

TEST_CASE("cost model") {
    CHECK_NOTHROW((CostModel{100, 4, 1, 0}.validate()));
    CHECK_THROWS_AS((CostModel{0, 4, 1, 0}.validate()), InvalidInput);
    CHECK_THROWS_AS((CostModel{100, 4, 0, 0}.validate()), InvalidInput);
    CHECK_THROWS_AS((CostModel{100, 4, 1, -1}.validate()), InvalidInput);
    CHECK_THROWS_AS((CostModel{NAN, 4, 1, 0}.validate()), InvalidInput);
    CHECK((CostModel{100, 4, 2, 1}.ordering_holds()));
    CHECK_FALSE((CostModel{100, 4, 5, 1}.ordering_holds()));
    CHECK(parse_strategy("g") == Strategy::G);
    CHECK(to_string(parse_strategy("single")) == "single");
    CHECK_THROWS_AS(parse_strategy("x"), InvalidInput);
}

TEST_CASE("single-phase allocation") {
    const auto r = allocate_single({100, 4, 1, 0}, comps(1, 0, 0), kLargeN);
    CHECK(r.feasible);
    CHECK(r.m_real == 25.0);
    CHECK(r.m_int == 25);
    CHECK(r.opt_variance_large_n == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(allocate_single({200, 4, 1, 0}, comps(1, 0, 0), kLargeN).opt_variance_large_n ==
          doctest::Approx(0.02).epsilon(1e-14));
    const auto census = allocate_single({100, 4, 1, 0}, comps(1, 0, 0), 25);
    CHECK(census.feasible);
    CHECK(census.opt_variance == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(census.int_variance == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(allocate_single({3, 4, 1, 0}, comps(1, 0, 0), kLargeN).feasible);
    const auto grid = grid_search_allocation({103, 4, 1, 0}, comps(1, 0, 0), 1000, Strategy::Single);
    CHECK(grid.m_int == 25);
}

TEST_CASE("worked allocation examples") {
    SUBCASE("x only") {
        const CostModel c{100, 4, 1, 0};
        const auto r = allocate_H(c, comps(1, 0.64, 0), kLargeN);
        CHECK(r.feasible);
        CHECK(r.m_real == doctest::Approx(15).epsilon(1e-12));
        CHECK(r.n_real == doctest::Approx(40).epsilon(1e-12));
        CHECK(r.opt_variance_large_n == doctest::Approx(0.04).epsilon(1e-12));
        CHECK(c.C1 * r.m_real + c.C2 * r.n_real == doctest::Approx(100).epsilon(1e-9));
        CHECK(r.m_int == 15);
        CHECK(r.n_int == 40);
        const auto grid = grid_search_allocation(c, comps(1, 0.64, 0), kLargeN, Strategy::H);
        CHECK(std::abs(static_cast<double>(grid.m_int) - 15.0) <= 1);
        CHECK(std::abs(static_cast<double>(grid.n_int) - 40.0) <= 1);
        CHECK(rel_diff(grid.int_variance, 0.04) <= 0.005);
    }
    SUBCASE("x and z") {
        const CostModel c{100, 4, 0.6, 0.4};
        const auto v = comps(1, 0.64, 0.36);
        const auto r = allocate_g(c, v, kLargeN);
        const double K = 1.2 + std::sqrt(0.28);
        CHECK(r.feasible);
        CHECK(r.m_real == doctest::Approx(30 / K).epsilon(1e-12));
        CHECK(r.n_real == doctest::Approx(100 * std::sqrt(0.28) / K).epsilon(1e-12));
        CHECK(r.m_real == doctest::Approx(17.3496).epsilon(1e-5));
        CHECK(r.n_real == doctest::Approx(30.6018).epsilon(1e-5));
        CHECK(r.opt_variance_large_n == doctest::Approx(0.0298996).epsilon(1e-5));
        CHECK(c.C1 * r.m_real + (c.C2 + c.C3) * r.n_real == doctest::Approx(100).epsilon(1e-9));
        const auto [gm, gv] = golden_optimum(Strategy::G, c, v);
        CHECK(r.m_real == doctest::Approx(gm).epsilon(1e-6));
        CHECK(r.opt_variance_large_n == doctest::Approx(gv).epsilon(1e-12));
    }
    SUBCASE("x and z with the extra association term") {
        const CostModel c{100, 4, 0.6, 0.4};
        const auto v = comps(1, 0.5, 0.25, 0.05);
        const auto r = allocate_F(c, v, kLargeN);
        CHECK(r.feasible);
        CHECK(r.m_real == doctest::Approx(17.75257).epsilon(1e-6));
        CHECK(r.n_real == doctest::Approx(28.98979).epsilon(1e-6));
        CHECK(r.opt_variance_large_n == doctest::Approx(0.03569694).epsilon(1e-6));
        CHECK(c.C1 * r.m_real + (c.C2 + c.C3) * r.n_real == doctest::Approx(100).epsilon(1e-9));
        const auto [gm, gv] = golden_optimum(Strategy::F, c, v);
        CHECK(r.m_real == doctest::Approx(gm).epsilon(1e-6));
        CHECK(r.opt_variance_large_n == doctest::Approx(gv).epsilon(1e-12));
    }
}

TEST_CASE("reductions between strategies") {
    const CostModel c{100, 4, 1, 0};
    const auto H = allocate_H(c, comps(1, 0.64, 0), kLargeN);
    const auto g = allocate_g(c, comps(1, 0.64, 0), kLargeN);
    CHECK(g.m_real == doctest::Approx(H.m_real).epsilon(1e-14));
    CHECK(g.n_real == doctest::Approx(H.n_real).epsilon(1e-14));
    CHECK(g.opt_variance_large_n == doctest::Approx(H.opt_variance_large_n).epsilon(1e-14));
    const CostModel c2{100, 4, 0.6, 0.4};
    const auto g2 = allocate_g(c2, comps(1, 0.64, 0.36), kLargeN);
    const auto F2 = allocate_F(c2, comps(1, 0.64, 0.36, 0), kLargeN);
    CHECK(F2.m_real == g2.m_real);
    CHECK(F2.opt_variance_large_n == g2.opt_variance_large_n);
}

TEST_CASE("infeasible allocations are flagged") {
    const CostModel c{100, 4, 1, 0};
    const auto none = allocate_H(c, comps(1, 0, 0), kLargeN);
    CHECK_FALSE(none.feasible);
    CHECK(none.reason.find("single-phase") != std::string::npos);
    const auto g = allocate_g(c, comps(1, 0.3, 0.5), kLargeN);
    CHECK_FALSE(g.feasible);
    CHECK(g.reason.find("second auxiliary removes first-phase value") != std::string::npos);
    CHECK_FALSE(allocate_F({100, 4, 1, 0.5}, comps(1, 0.6, 0.2, 0.5), kLargeN).feasible);
    // V1 close to V0: nearly all budget goes to the first phase
    const auto edge = allocate_H(c, comps(1, 0.9999, 0), kLargeN);
    CHECK(edge.m_real < 2);
    CHECK_FALSE(edge.feasible);
    // optimum beyond the population
    CHECK_FALSE(allocate_H(c, comps(1, 0.64, 0), 30).feasible);
    CHECK_THROWS_AS(allocate_H(c, comps(0, 0, 0), kLargeN), InvalidInput);
}

TEST_CASE("grid search on small budgets") {
    const CostModel tiny{4 * 2 + 1 * 3, 4, 1, 0};
    const auto r = grid_search_allocation(tiny, comps(1, 0.5, 0), 100, Strategy::H);
    CHECK(r.feasible);
    CHECK(r.m_int == 2);
    CHECK(r.n_int == 3);
    CHECK_FALSE(grid_search_allocation({10, 4, 1, 0}, comps(1, 0.5, 0), 100, Strategy::H).feasible);
}

TEST_CASE("closed forms agree with independent optimizers on random inputs") {
    CounterRng rng({71, 0});
    int checked = 0;
    for (int rep = 0; rep < 400; ++rep) {
        const auto c = random_cost(rng);
        const auto v = random_comps(rng);
        for (auto s : {Strategy::H, Strategy::G, Strategy::F}) {
            const auto r = allocate(s, c, v, kLargeN);
            if (r.n_real <= 0 || !std::isfinite(r.m_real)) continue;
            const double cn = s == Strategy::H ? c.C2 : c.C2 + c.C3;
            CHECK(rel_diff(c.C1 * r.m_real + cn * r.n_real, c.C0) <= 1e-9);
            const auto [gm, gv] = golden_optimum(s, c, v);
            CHECK(rel_diff(r.opt_variance_large_n, gv) <= 1e-10);
            CHECK(r.opt_variance_large_n <= gv * (1 + 1e-12));
            if (r.feasible) {
                CHECK(r.m_real <= r.n_real);
                ++checked;
            }
        }
    }
    CHECK(checked > 200);
}

TEST_CASE("grid search brackets the closed form") {
    CounterRng rng({72, 0});
    for (int rep = 0; rep < 150; ++rep) {
        const auto c = random_cost(rng);
        const auto v = random_comps(rng);
        const std::size_t N = 50000;
        for (auto s : {Strategy::H, Strategy::G, Strategy::F}) {
            const auto r = allocate(s, c, v, N);
            if (!r.feasible) continue;
            const auto grid = grid_search_allocation(c, v, N, s);
            REQUIRE(grid.feasible);
            CHECK(grid.int_variance <= r.int_variance * (1 + 1e-12));
            CHECK(grid.int_variance >= r.opt_variance * (1 - 1e-12));
            const double cn = s == Strategy::H ? c.C2 : c.C2 + c.C3;
            CHECK(c.C1 * static_cast<double>(r.m_int) + cn * static_cast<double>(r.n_int) <= c.C0 * (1 + 1e-9));
        }
    }
}

TEST_CASE("more budget never hurts") {
    CounterRng rng({73, 0});
    for (int rep = 0; rep < 300; ++rep) {
        auto c = random_cost(rng);
        const auto v = random_comps(rng);
        for (auto s : {Strategy::Single, Strategy::H, Strategy::G, Strategy::F}) {
            const auto a = allocate(s, c, v, kLargeN);
            auto richer = c;
            richer.C0 *= uniform(rng, 1.0, 3.0);
            const auto b = allocate(s, richer, v, kLargeN);
            if (a.feasible && b.feasible) CHECK(b.opt_variance <= a.opt_variance);
        }
    }
}

TEST_CASE("strategy dominance without a z cost") {
    CounterRng rng({74, 0});
    int compared = 0;
    for (int rep = 0; rep < 500; ++rep) {
        auto c = random_cost(rng);
        c.C3 = 0;
        const auto v = random_comps(rng);
        const auto H = allocate_H(c, v, kLargeN), g = allocate_g(c, v, kLargeN), F = allocate_F(c, v, kLargeN);
        if (!(H.feasible && g.feasible && F.feasible)) continue;
        ++compared;
        CHECK(F.opt_variance_large_n <= g.opt_variance_large_n * (1 + 1e-12));
        CHECK(g.opt_variance_large_n <= H.opt_variance_large_n * (1 + 1e-12));
    }
    CHECK(compared > 50);
}

TEST_CASE("profitability verdicts") {
    SUBCASE("worked example") {
        const auto rep = profitability_report({100, 4, 0.6, 0.4}, comps(1, 0.64, 0.36), kLargeN);
        const auto& gs = rep.comparisons.at(0);
        CHECK(gs.name == "g-vs-single");
        CHECK(gs.verdict == Verdict::Gain);
        CHECK(gs.closed_lhs == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(gs.closed_rhs == doctest::Approx(0.16 / 0.28).epsilon(1e-12));
        CHECK(gs.closed_holds);
        CHECK(gs.challenger_variance == doctest::Approx(0.0298996).epsilon(1e-5));
        CHECK(gs.baseline_variance == doctest::Approx(0.04).epsilon(1e-12));
        CHECK(rep.cost_ordering_holds);
    }
    SUBCASE("z adds nothing") {
        const auto rep = profitability_report({100, 4, 1, 0}, comps(1, 0.64, 0), kLargeN);
        CHECK(rep.comparisons.at(1).name == "g-vs-H");
        CHECK(rep.comparisons.at(1).verdict == Verdict::NoGain);
        CHECK(rep.comparisons.at(4).name == "F-vs-g");
        CHECK(rep.comparisons.at(4).verdict == Verdict::NoGain);
    }
    SUBCASE("infeasible side is not comparable") {
        const auto rep = profitability_report({100, 4, 1, 0}, comps(1, 0.3, 0.5), kLargeN);
        CHECK(rep.comparisons.at(0).verdict == Verdict::NotComparable);
    }
    SUBCASE("closed forms agree with the numeric verdicts") {
        CounterRng rng({75, 0});
        for (int rep = 0; rep < 500; ++rep) {
            const auto report = profitability_report(random_cost(rng), random_comps(rng), kLargeN);
            for (const auto& cmp : report.comparisons) {
                if (cmp.verdict != Verdict::Gain && cmp.verdict != Verdict::Loss) continue;
                if (!cmp.closed_available) continue;
                // skip near-ties where rounding decides
                if (rel_diff(cmp.challenger_variance, cmp.baseline_variance) < 1e-9) continue;
                INFO(cmp.name);
                CHECK(cmp.closed_holds == (cmp.verdict == Verdict::Gain));
            }
        }
    }
}
