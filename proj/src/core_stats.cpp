#include "dsmedian/core_stats.hpp"

#include "dsmedian/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dsmedian {

namespace {

void require_finite(std::span<const double> values) {
    if (values.empty()) throw InvalidInput("empty sample");
    for (double v : values) {
        if (!std::isfinite(v)) throw InvalidInput("invalid datum");
    }
}

// 0-based rank of Q(p) in sorted order: the smallest k with (k + 1) / n >= p.
std::size_t quantile_rank(std::size_t n, double p) {
    const double nd = static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(p * nd));
    k = std::clamp<std::size_t>(k, 1, n);
    // p * n can round up past an exact integer; step back while the previous
    // order statistic already reaches p.
    while (k > 1 && static_cast<double>(k - 1) / nd >= p) --k;
    while (k < n && static_cast<double>(k) / nd < p) ++k;
    return k - 1;
}

}  // namespace

double normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double empirical_quantile(std::span<const double> values, double p) {
    require_finite(values);
    if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("quantile probability must lie in (0, 1]");
    std::vector<double> work(values.begin(), values.end());
    const auto rank = quantile_rank(work.size(), p);
    std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(rank), work.end());
    return work[rank];
}

double sample_median(std::span<const double> values) { return empirical_quantile(values, 0.5); }

double sample_sd(std::span<const double> values) {
    require_finite(values);
    if (values.size() < 2) throw InvalidInput("standard deviation needs at least two values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

ProportionMatrix proportion_matrix(std::span<const double> a, std::span<const double> b,
                                   double threshold_a, double threshold_b) {
    if (a.empty()) throw InvalidInput("empty sample");
    if (a.size() != b.size()) throw InvalidInput("paired samples differ in length");
    if (!std::isfinite(threshold_a) || !std::isfinite(threshold_b)) throw InvalidInput("invalid datum");
    ProportionMatrix pm;
    pm.total = a.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool a_low = a[i] <= threshold_a;
        const bool b_low = b[i] <= threshold_b;
        if (a_low && b_low) ++pm.n11;
        else if (!a_low && b_low) ++pm.n12;
        else if (a_low) ++pm.n21;
        else ++pm.n22;
    }
    return pm;
}

double silverman_bandwidth(std::span<const double> values) {
    require_finite(values);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (values.size() < 2 || *lo == *hi) throw InvalidInput("degenerate sample for bandwidth");
    const double sd = sample_sd(values);
    const double iqr = empirical_quantile(values, 0.75) - empirical_quantile(values, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
}

DensityEstimate kde_at(std::span<const double> values, double point, double bandwidth) {
    require_finite(values);
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidInput("bandwidth must be positive");
    double sum = 0.0;
    for (double v : values) sum += normal_pdf((point - v) / bandwidth);
    return {sum / (static_cast<double>(values.size()) * bandwidth), bandwidth};
}

DensityEstimate kde_at(std::span<const double> values, double point) {
    return kde_at(values, point, silverman_bandwidth(values));
}

}  // namespace dsmedian
