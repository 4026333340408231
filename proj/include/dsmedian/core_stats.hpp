#pragma once

#include <cstddef>
#include <span>

namespace dsmedian {

/// The only quantile rule in the library: Q(p) = inf{ v : ecdf(v) >= p }
/// (type-1, no interpolation). Named so reports can state it.
enum class QuantileConvention { LeftContinuousInverse };

inline constexpr QuantileConvention kQuantileConvention = QuantileConvention::LeftContinuousInverse;

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;

/// Standard normal density.
double normal_pdf(double t);

/// Smallest element whose empirical CDF value is >= p, for p in (0, 1].
/// Throws InvalidInput on an empty sample ("empty sample"), a non-finite
/// element ("invalid datum") or p outside (0, 1].
double empirical_quantile(std::span<const double> values, double p);

/// empirical_quantile(values, 0.5).
double sample_median(std::span<const double> values);

/// Sample standard deviation with the (k - 1) denominator.
double sample_sd(std::span<const double> values);

/// Quadrant table of paired observations (a, b) split at (threshold_a,
/// threshold_b), "low" meaning <= the threshold.
///
///   p11 = P(A <= ta, B <= tb)    p12 = P(A > ta, B <= tb)
///   p21 = P(A <= ta, B > tb)     p22 = P(A > ta, B > tb)
///
/// Counts are kept so the cells sum to the total exactly.
struct ProportionMatrix {
    std::size_t n11 = 0;
    std::size_t n12 = 0;
    std::size_t n21 = 0;
    std::size_t n22 = 0;
    std::size_t total = 0;

    double p11() const { return static_cast<double>(n11) / static_cast<double>(total); }
    double p12() const { return static_cast<double>(n12) / static_cast<double>(total); }
    double p21() const { return static_cast<double>(n21) / static_cast<double>(total); }
    double p22() const { return static_cast<double>(n22) / static_cast<double>(total); }

    /// Marginal P(A <= ta).
    double row_a_low() const { return static_cast<double>(n11 + n21) / static_cast<double>(total); }
    /// Marginal P(B <= tb).
    double col_b_low() const { return static_cast<double>(n11 + n12) / static_cast<double>(total); }

    /// 4 p11 - 1, the median-concordance coefficient.
    double concordance() const { return 4.0 * p11() - 1.0; }
};

ProportionMatrix proportion_matrix(std::span<const double> a, std::span<const double> b,
                                   double threshold_a, double threshold_b);

/// Gaussian-kernel rule of thumb: 0.9 * min(sd, IQR / 1.34) * k^(-1/5).
/// Falls back to sd when the IQR is zero. Throws InvalidInput
/// ("degenerate sample for bandwidth") when all values are equal.
double silverman_bandwidth(std::span<const double> values);

struct DensityEstimate {
    double value = 0.0;
    double bandwidth = 0.0;
};

/// Gaussian kernel density estimate at `point`.
DensityEstimate kde_at(std::span<const double> values, double point, double bandwidth);

/// kde_at with silverman_bandwidth.
DensityEstimate kde_at(std::span<const double> values, double point);

}  // namespace dsmedian
