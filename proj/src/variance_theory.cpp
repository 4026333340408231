#include "dsmedian/variance_theory.hpp"

#include "dsmedian/error.hpp"

#include <cmath>

namespace dsmedian {

void DesignSizes::validate() const {
    if (!(m >= 1 && m <= n && n <= N)) throw InvalidInput("design sizes require 1 <= m <= n <= N");
}

double DesignSizes::f_mN() const { return 1.0 / static_cast<double>(m) - 1.0 / static_cast<double>(N); }
double DesignSizes::f_mn() const { return 1.0 / static_cast<double>(m) - 1.0 / static_cast<double>(n); }
double DesignSizes::f_nN() const { return 1.0 / static_cast<double>(n) - 1.0 / static_cast<double>(N); }

AssociationSet AssociationSet::from_summary(const PopulationSummary& s) {
    AssociationSet a;
    a.rho_xy = s.pm_xy.concordance();
    a.rho_yz = s.pm_yz.concordance();
    a.rho_xz = s.pm_xz.concordance();
    a.scale_x = s.median_x * s.density_x;
    a.scale_y = s.median_y * s.density_y;
    a.scale_z = s.median_z * s.density_z;
    a.density_y = s.density_y;
    return a;
}

namespace {

double v0_of(double density_y) {
    if (!(density_y > 0.0) || !std::isfinite(density_y)) throw DegenerateModel("zero density");
    return 1.0 / (4.0 * density_y * density_y);
}

double collinearity_gap(double rho_xz) {
    const double gap = 1.0 - rho_xz * rho_xz;
    if (!(gap > 0.0)) throw DegenerateModel("auxiliary collinearity");
    return gap;
}

}  // namespace

VarianceComponents variance_components(const AssociationSet& assoc) {
    VarianceComponents c;
    c.V0 = v0_of(assoc.density_y);
    c.V1 = c.V0 * assoc.rho_xy * assoc.rho_xy;
    c.V2 = c.V0 * assoc.rho_yz * assoc.rho_yz;
    const double D = assoc.D();
    c.V3 = c.V0 * D * D / collinearity_gap(assoc.rho_xz);
    return c;
}

VarianceComponents variance_components(const PopulationSummary& s) {
    return variance_components(AssociationSet::from_summary(s));
}

double var_sample_median(const DesignSizes& sizes, const AssociationSet& assoc) {
    sizes.validate();
    return sizes.f_mN() * v0_of(assoc.density_y);
}

double var_sample_median(const DesignSizes& sizes, const VarianceComponents& comps) {
    sizes.validate();
    return sizes.f_mN() * comps.V0;
}

double var_class_g(const DesignSizes& sizes, const AssociationSet& assoc, double g1, double g2) {
    sizes.validate();
    const double V0 = v0_of(assoc.density_y);
    const double kx = assoc.scale_y / assoc.scale_x * g1;
    const double kz = assoc.scale_y / assoc.scale_z * g2;
    const double A = kx * (kx + 2.0 * assoc.rho_xy);
    const double B = kz * (kz + 2.0 * assoc.rho_yz);
    return V0 * (sizes.f_mN() + sizes.f_mn() * A + sizes.f_nN() * B);
}

GOptimum optimum_g_derivatives(const AssociationSet& assoc) {
    if (assoc.scale_y == 0.0 || !std::isfinite(assoc.scale_y)) throw DegenerateModel("zero scale for y");
    GOptimum o;
    o.alpha1 = assoc.scale_x / assoc.scale_y * assoc.rho_xy;
    o.alpha2 = assoc.scale_z / assoc.scale_y * assoc.rho_yz;
    o.g1 = -o.alpha1;
    o.g2 = -o.alpha2;
    // M_Y cancels: alpha* = M f(M) rho / f_Y(M_Y)
    o.alpha1_star = assoc.scale_x / assoc.density_y * assoc.rho_xy;
    o.alpha2_star = assoc.scale_z / assoc.density_y * assoc.rho_yz;
    return o;
}

// The three minima share one expression evaluated left to right, so
// F <= g <= H <= (1/m - 1/N)V0 holds in floating point as well.
double min_var_H(const DesignSizes& sizes, const VarianceComponents& comps) {
    return var_sample_median(sizes, comps) - sizes.f_mn() * comps.V1;
}

double min_var_g(const DesignSizes& sizes, const VarianceComponents& comps) {
    return min_var_H(sizes, comps) - sizes.f_nN() * comps.V2;
}

double min_var_F(const DesignSizes& sizes, const VarianceComponents& comps) {
    return min_var_g(sizes, comps) - sizes.f_mn() * comps.V3;
}

double var_class_F(const DesignSizes& sizes, const AssociationSet& assoc, double F2, double F3, double F4) {
    sizes.validate();
    const double V0 = v0_of(assoc.density_y);
    const double kx = assoc.density_y / assoc.scale_x;  // f_Y / (M_X f_X)
    const double kz = assoc.density_y / assoc.scale_z;  // f_Y / (M_Z f_Z)
    const double A1 = 1.0 + kz * kz * F4 * F4 + 2.0 * assoc.rho_yz * kz * F4;
    const double A2 = kx * (kx * F2 * F2 + 2.0 * assoc.rho_xy * F2 + 2.0 * assoc.rho_xz * kz * F2 * F4);
    const double A3 = kz * (kz * F3 * F3 + 2.0 * assoc.rho_yz * F3 + 2.0 * kz * F3 * F4);
    return V0 * (sizes.f_mN() * A1 + sizes.f_mn() * A2 + sizes.f_nN() * A3);
}

FOptimum optimum_F_derivatives(const AssociationSet& assoc) {
    if (!(assoc.density_y > 0.0)) throw DegenerateModel("zero density");
    const double gap = collinearity_gap(assoc.rho_xz);
    FOptimum o;
    o.D = assoc.D();
    const double x_part = assoc.rho_xy - assoc.rho_xz * assoc.rho_yz;
    o.F2 = -x_part / gap * assoc.scale_x / assoc.density_y;
    o.F3 = -assoc.rho_xz * x_part / gap * assoc.scale_z / assoc.density_y;
    o.F4 = -o.D / gap * assoc.scale_z / assoc.density_y;
    return o;
}

}  // namespace dsmedian
