#pragma once

#include "dsmedian/sampling.hpp"
#include "dsmedian/variance_theory.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dsmedian::testing {

inline double uniform(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline std::vector<double> normal_sample(CounterRng& rng, std::size_t k, double mu = 0.0, double sigma = 1.0) {
    std::vector<double> v(k);
    for (auto& x : v) x = mu + sigma * rng.normal();
    return v;
}

// Concordances whose 3x3 matrix is positive definite, plus positive scales.
inline AssociationSet random_association(CounterRng& rng) {
    while (true) {
        AssociationSet a;
        a.rho_xy = uniform(rng, -0.98, 0.98);
        a.rho_yz = uniform(rng, -0.98, 0.98);
        a.rho_xz = uniform(rng, -0.98, 0.98);
        const double det = 1.0 + 2.0 * a.rho_xy * a.rho_yz * a.rho_xz - a.rho_xy * a.rho_xy -
                           a.rho_yz * a.rho_yz - a.rho_xz * a.rho_xz;
        if (det <= 1e-6) continue;
        a.density_y = uniform(rng, 0.01, 2.0);
        a.scale_y = a.density_y * uniform(rng, 0.5, 200.0);
        a.scale_x = uniform(rng, 0.05, 50.0);
        a.scale_z = uniform(rng, 0.05, 50.0);
        return a;
    }
}

inline DesignSizes random_design(CounterRng& rng) {
    DesignSizes d;
    d.N = 50 + rng.bounded(100000);
    d.n = 3 + rng.bounded(d.N - 2);
    d.m = 2 + rng.bounded(d.n - 2);
    return d;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace dsmedian::testing
