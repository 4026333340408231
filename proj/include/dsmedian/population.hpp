#pragma once

#include "dsmedian/core_stats.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace dsmedian {

/// A finite population of N units carrying (x, y, z). y is the study
/// variable, x and z are auxiliaries. Immutable once built.
class Population {
public:
    /// Validates N >= 4, equal lengths and finite values; throws InvalidInput.
    Population(std::vector<double> x, std::vector<double> y, std::vector<double> z);

    std::size_t size() const { return y_.size(); }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& y() const { return y_; }
    const std::vector<double>& z() const { return z_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> z_;
};

/// Reads a population from CSV: a header naming the columns x, y, z (any
/// order, no others), then one unit per line. Errors carry the line number.
Population parse_population_csv(std::istream& in, std::string_view source_name = "<input>");
Population read_population_csv(const std::filesystem::path& path);

/// Marginal densities evaluated at the respective medians.
struct MarginalDensities {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

enum class DensitySource { CensusKde, Analytic };

struct PopulationSummary {
    std::size_t N = 0;
    double median_x = 0.0;
    double median_y = 0.0;
    double median_z = 0.0;
    double density_x = 0.0;
    double density_y = 0.0;
    double density_z = 0.0;
    ProportionMatrix pm_xy;
    ProportionMatrix pm_xz;
    ProportionMatrix pm_yz;
    DensitySource density_source = DensitySource::CensusKde;
};

/// Census medians and proportion matrices; densities by Gaussian KDE with
/// the Silverman bandwidth over the whole population. Throws DegenerateModel
/// ("zero density at median") for a constant variable.
PopulationSummary population_summary(const Population& pop);

/// Same, but with densities supplied by the caller (e.g. a generator that
/// knows its marginals analytically).
PopulationSummary population_summary(const Population& pop, const MarginalDensities& known);

}  // namespace dsmedian
