#pragma once

#include "dsmedian/population.hpp"
#include "dsmedian/sampling.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dsmedian {

/// Sample medians of a two-phase sample. Unprimed: second phase S_m.
/// Primed (`*_first`): first phase S_n.
struct SampleMedians {
    double y = 0.0;
    double x = 0.0;
    double x_first = 0.0;
    double z = 0.0;
    double z_first = 0.0;
};

/// What an estimator may look at: (x, y, z) on S_m, (x, z) on S_n, the
/// known population median of z and, optionally, that of x.
/// Medians are computed once at construction; the view is immutable.
class SampleView {
public:
    SampleView(std::vector<double> x_m, std::vector<double> y_m, std::vector<double> z_m,
               std::vector<double> x_n, std::vector<double> z_n,
               std::optional<double> known_mx, double known_mz);

    static SampleView from_population(const Population& pop, const TwoPhaseSample& sample,
                                      std::optional<double> known_mx, double known_mz);

    std::size_t m() const { return y_m_.size(); }
    std::size_t n() const { return x_n_.size(); }

    const std::vector<double>& x_second() const { return x_m_; }
    const std::vector<double>& y_second() const { return y_m_; }
    const std::vector<double>& z_second() const { return z_m_; }
    const std::vector<double>& x_first() const { return x_n_; }
    const std::vector<double>& z_first() const { return z_n_; }

    const std::optional<double>& known_mx() const { return known_mx_; }
    double known_mz() const { return known_mz_; }

    const SampleMedians& medians() const { return medians_; }

    /// u = M_X-hat / M'_X-hat
    double u() const;
    /// v = M'_Z-hat / M_Z
    double v() const;
    /// w = M_Z-hat / M_Z
    double w() const;

private:
    std::vector<double> x_m_, y_m_, z_m_;
    std::vector<double> x_n_, z_n_;
    std::optional<double> known_mx_;
    double known_mz_;
    SampleMedians medians_;
};

SampleMedians sample_medians(const SampleView& view);

/// M_Y-hat * M_X / M_X-hat. Needs known_mx.
double ratio_known(const SampleView& view);

enum class PositionForm {
    Approximate,  // 2 (m_x p11 + (m - m_x) p12) / m
    Conditional,  // (m_x p11 / p.1 + (m - m_x) p12 / p.2) / m
};

struct PositionResult {
    double estimate = 0.0;
    double p_hat = 0.0;    // after clamping
    bool clamped = false;  // p_hat was moved into [1/m, 1]
};

/// Position estimator: re-estimates the proportion of y below its median from
/// the x-strata (m_x counted about the known M_X, quadrant proportions about
/// the sample medians) and inverts the second-phase ECDF there.
PositionResult position_estimator(const SampleView& view, PositionForm form = PositionForm::Approximate);

/// Stratification estimator: smallest second-phase y where the average of the
/// within-stratum ECDFs (x <= M_X and x > M_X) reaches 0.5. Throws
/// DegenerateModel ("stratification undefined") when a stratum is empty.
double stratification_estimator(const SampleView& view);

/// M_Y-hat * M'_X-hat / M_X-hat.
double ratio_double(const SampleView& view);

/// Coefficients of the optimum linear forms, either estimated from S_m
/// (plug-in) or evaluated at known population values.
struct Coefficients {
    double d1 = 0.0;  // f_X / f_Y * rho_xy
    double d2 = 0.0;  // f_Z / f_Y * rho_yz
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha1_star = 0.0;
    double alpha2_star = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
};

/// Sample analogues on S_m: quadrant proportions about the sample medians,
/// densities by KDE at the sample medians. Throws InvalidInput when m < 4 or
/// a variable has fewer than two distinct values, DegenerateModel for a zero
/// density, M_Y-hat == 0 or collinear auxiliaries.
Coefficients plugin_coefficients(const SampleView& view);

/// The same formulas evaluated at the population truth.
Coefficients optimal_coefficients(const PopulationSummary& summary);

/// M_Y-hat + d1 (M'_X-hat - M_X-hat) + d2 (M_Z - M'_Z-hat).
double regression_two_aux(const SampleView& view, const Coefficients& c);

/// M_Y-hat + d1 (M'_X-hat - M_X-hat).
double regression_single_aux(const SampleView& view, const Coefficients& c);

enum class GFormKind { G1 = 1, G2, G3, G4, G5, G6, G7 };

/// One of the seven parametric g(u, v) with g(1, 1) = 1:
///   g1 = u^a v^b                     g2 = (1 + a(u-1)) / (1 - b(v-1))
///   g3 = 1 + a(u-1) + b(v-1)         g4 = 1 / (1 - a(u-1) - b(v-1))
///   g5 = w1 u^a + w2 v^b             g6 = a u + (1 - a) v^b
///   g7 = exp(a(u-1) + b(v-1))
struct GForm {
    GFormKind kind = GFormKind::G1;
    double alpha = 0.0;
    double beta = 0.0;
    double w1 = 0.5;  // g5 only; w1 + w2 = 1
    double w2 = 0.5;
};

double evaluate_gform(const GForm& form, double u, double v);

/// Parameters that put dg/du = -alpha1 and dg/dv = -alpha2 at (1, 1).
/// For g5 the weights are kept and the exponents absorb them.
GForm optimal_gform(GFormKind kind, double alpha1, double alpha2, double w1 = 0.5);

/// M_Y-hat * g(u, v).
double class_g_estimate(const SampleView& view, const GForm& form);

/// M_Y-hat - a1 (u - 1) - a2 (v - 1) - a3 (w - 1).
double class_F_estimate(const SampleView& view, const Coefficients& c);

// ---------------------------------------------------------------------------
// Stable identifiers used by the CLI and the simulation reports.

enum class EstimatorId {
    Median,
    RatioKnown,
    Position,
    Stratified,
    RatioDouble,
    RegX,
    RegXZ,
    G1, G2, G3, G4, G5, G6, G7,
    FLinear,
    // known-coefficient counterparts (population truth in place of plug-ins)
    RegXOpt,
    RegXZOpt,
    G1Opt, G2Opt, G3Opt, G4Opt, G5Opt, G6Opt, G7Opt,
    FLinearOpt,
};

std::string_view to_string(EstimatorId id);
std::optional<EstimatorId> parse_estimator(std::string_view name);
const std::vector<EstimatorId>& all_estimators();
/// Ids usable on real data (no population truth needed).
const std::vector<EstimatorId>& sample_estimators();

/// Whether the estimator belongs to the smooth classes g, G or F
/// (including their known-coefficient versions).
bool is_class_gGF(EstimatorId id);
bool needs_true_coefficients(EstimatorId id);

struct EstimateOutcome {
    std::optional<double> value;
    std::string error;      // set when value is empty
    bool clamped = false;   // position estimator moved p_hat
    bool fallback = false;  // stratified fell back to the sample median
};

/// Evaluates catalog estimators on one view, computing plug-in coefficients
/// at most once.
class EstimatorContext {
public:
    explicit EstimatorContext(const SampleView& view, const Coefficients* true_coeffs = nullptr);

    EstimateOutcome evaluate(EstimatorId id);

    /// Plug-in coefficients, or nullptr with the failure in `error`.
    const Coefficients* plugin(std::string* error = nullptr);

private:
    const SampleView& view_;
    const Coefficients* true_coeffs_;
    bool plugin_tried_ = false;
    std::optional<Coefficients> plugin_;
    std::string plugin_error_;
};

}  // namespace dsmedian
