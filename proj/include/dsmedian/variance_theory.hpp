#pragma once

#include "dsmedian/population.hpp"

#include <cstddef>

namespace dsmedian {

/// Second-phase size m, first-phase size n, population size N. A proper
/// two-phase design has 2 <= m < n <= N; the formulas below also accept the
/// boundary m == n (no first-phase gain) and m == N (census).
struct DesignSizes {
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t N = 0;

    /// Throws InvalidInput unless 1 <= m <= n <= N.
    void validate() const;
    bool is_two_phase() const { return m >= 2 && m < n && n <= N; }

    double f_mN() const;  // 1/m - 1/N
    double f_mn() const;  // 1/m - 1/n
    double f_nN() const;  // 1/n - 1/N
};

/// Median-concordance coefficients rho = 4 P11 - 1 and the scales M f(M)
/// that recur in every first-order variance.
struct AssociationSet {
    double rho_xy = 0.0;
    double rho_yz = 0.0;
    double rho_xz = 0.0;
    double scale_x = 0.0;  // M_X f_X(M_X)
    double scale_y = 0.0;  // M_Y f_Y(M_Y)
    double scale_z = 0.0;  // M_Z f_Z(M_Z)
    double density_y = 0.0;  // f_Y(M_Y)

    static AssociationSet from_summary(const PopulationSummary& s);

    /// rho_yz - rho_xy * rho_xz
    double D() const { return rho_yz - rho_xy * rho_xz; }
};

/// V0 = 1 / (4 f_Y(M_Y)^2), V1 = V0 rho_xy^2, V2 = V0 rho_yz^2,
/// V3 = V0 D^2 / (1 - rho_xz^2).
struct VarianceComponents {
    double V0 = 0.0;
    double V1 = 0.0;
    double V2 = 0.0;
    double V3 = 0.0;
};

/// Throws DegenerateModel on zero density or rho_xz^2 >= 1.
VarianceComponents variance_components(const AssociationSet& assoc);
VarianceComponents variance_components(const PopulationSummary& s);

/// (1/m - 1/N) V0.
double var_sample_median(const DesignSizes& sizes, const AssociationSet& assoc);
double var_sample_median(const DesignSizes& sizes, const VarianceComponents& comps);

/// First-order variance of M_Y-hat * g(u, v) given the partial derivatives
/// g1 = dg/du and g2 = dg/dv at (1, 1).
double var_class_g(const DesignSizes& sizes, const AssociationSet& assoc, double g1, double g2);

struct GOptimum {
    double g1 = 0.0;
    double g2 = 0.0;
    double alpha1 = 0.0;       // -g1
    double alpha2 = 0.0;       // -g2
    double alpha1_star = 0.0;  // alpha1 * M_Y
    double alpha2_star = 0.0;  // alpha2 * M_Y
};

/// Variance-minimizing g derivatives. Throws DegenerateModel when scale_y == 0.
GOptimum optimum_g_derivatives(const AssociationSet& assoc);

/// min over g (and over the wider class with an additive M_Y-hat term):
/// (1/m - 1/N)V0 - (1/m - 1/n)V1 - (1/n - 1/N)V2.
double min_var_g(const DesignSizes& sizes, const VarianceComponents& comps);

/// Single auxiliary: (1/m - 1/N)V0 - (1/m - 1/n)V1.
double min_var_H(const DesignSizes& sizes, const VarianceComponents& comps);

/// First-order variance of F(M_Y-hat, u, v, w) with partials F2, F3, F4
/// (y units) with respect to u, v, w at (M_Y, 1, 1, 1).
double var_class_F(const DesignSizes& sizes, const AssociationSet& assoc, double F2, double F3, double F4);

struct FOptimum {
    double F2 = 0.0;  // -a1
    double F3 = 0.0;  // -a2
    double F4 = 0.0;  // -a3
    double D = 0.0;
};

/// Throws DegenerateModel ("auxiliary collinearity") when rho_xz^2 >= 1.
FOptimum optimum_F_derivatives(const AssociationSet& assoc);

/// min_var_g - (1/m - 1/n) V3.
double min_var_F(const DesignSizes& sizes, const VarianceComponents& comps);

}  // namespace dsmedian
