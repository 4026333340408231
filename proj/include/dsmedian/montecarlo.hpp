#pragma once

#include "dsmedian/estimators.hpp"
#include "dsmedian/population.hpp"
#include "dsmedian/variance_theory.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dsmedian {

enum class MarginalFamily { Normal, Lognormal };

/// Normal(mu, sigma), or lognormal with log-scale parameters (mu, sigma).
struct MarginalSpec {
    MarginalFamily family = MarginalFamily::Normal;
    double mu = 0.0;
    double sigma = 1.0;

    void validate() const;
    double median() const;
    double density_at_median() const;
    /// Maps a standard normal variate to this marginal (monotone).
    double from_standard_normal(double t) const;
};

/// Trivariate Gaussian copula with marginals for (x, y, z).
struct GeneratorSpec {
    std::size_t N = 0;
    double r_xy = 0.0;
    double r_yz = 0.0;
    double r_xz = 0.0;
    MarginalSpec x, y, z;

    /// Throws InvalidInput for N < 4, |r| >= 1 or a correlation matrix that
    /// is not positive definite.
    void validate() const;
};

struct GeneratedPopulation {
    Population population;
    MarginalDensities densities;  // analytic, at the marginal medians
};

/// N i.i.d. draws; uses stream_id = UINT64_MAX of `master_seed`, so it never
/// collides with replicate streams.
GeneratedPopulation generate_population(const GeneratorSpec& spec, std::uint64_t master_seed);

struct SimConfig {
    std::optional<std::filesystem::path> population_csv;  // exclusive with generator
    std::optional<GeneratorSpec> generator;
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t replicates = 0;
    std::uint64_t master_seed = 0;
    std::vector<EstimatorId> estimators;
    unsigned threads = 1;  // never affects results

    void validate() const;
};

/// Canonical JSON of everything that determines the results (threads excluded).
nlohmann::json config_to_json(const SimConfig& config);
std::string config_hash(const SimConfig& config);

struct EstimatorStats {
    EstimatorId id = EstimatorId::Median;
    std::size_t n_ok = 0;
    std::size_t failures = 0;
    std::size_t clamps = 0;
    std::size_t fallbacks = 0;
    double mean = 0.0;
    double bias = 0.0;
    double rel_bias = 0.0;
    double mse = 0.0;
    double mse_se = 0.0;  // Monte Carlo standard error of mse
    std::optional<double> theory_variance;
    std::optional<double> mse_over_theory;
    bool flagged = false;       // failure rate above 5%
    std::string first_error;
};

struct SimReport {
    SimConfig config;
    std::string config_hash;
    std::size_t N = 0;
    double true_median = 0.0;
    PopulationSummary summary;
    VarianceComponents components;
    std::vector<EstimatorStats> stats;  // in config.estimators order
    bool valid = true;

    const EstimatorStats& at(EstimatorId id) const;
};

/// Loads or generates the population named by the config, then simulates.
SimReport run_simulation(const SimConfig& config);

/// Simulates on a given population with a given true summary.
SimReport run_simulation(const SimConfig& config, const Population& pop, const PopulationSummary& truth);

/// First-order variance the estimator is compared to, if one applies.
std::optional<double> theory_variance(EstimatorId id, const DesignSizes& sizes, const PopulationSummary& truth);

nlohmann::json to_json(const SimReport& report);
nlohmann::json to_json(const PopulationSummary& summary);
nlohmann::json to_json(const VarianceComponents& comps);

/// One row per estimator.
void write_csv(std::ostream& out, const SimReport& report);

}  // namespace dsmedian
