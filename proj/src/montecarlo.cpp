#include "dsmedian/montecarlo.hpp"

#include "dsmedian/core_stats.hpp"
#include "dsmedian/digest.hpp"
#include "dsmedian/error.hpp"
#include "dsmedian/sampling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace dsmedian {

void MarginalSpec::validate() const {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0))
        throw InvalidInput("marginal needs finite mu and sigma > 0");
}

double MarginalSpec::median() const { return family == MarginalFamily::Normal ? mu : std::exp(mu); }

double MarginalSpec::density_at_median() const {
    const double base = kInvSqrt2Pi / sigma;
    return family == MarginalFamily::Normal ? base : base / std::exp(mu);
}

double MarginalSpec::from_standard_normal(double t) const {
    const double v = mu + sigma * t;
    return family == MarginalFamily::Normal ? v : std::exp(v);
}

namespace {

Eigen::Matrix3d correlation_matrix(const GeneratorSpec& s) {
    Eigen::Matrix3d c;
    c << 1.0, s.r_xy, s.r_xz,
         s.r_xy, 1.0, s.r_yz,
         s.r_xz, s.r_yz, 1.0;
    return c;
}

}  // namespace

void GeneratorSpec::validate() const {
    if (N < 4) throw InvalidInput("generator needs N >= 4");
    for (double r : {r_xy, r_yz, r_xz}) {
        if (!std::isfinite(r) || std::abs(r) >= 1.0) throw InvalidInput("correlations must lie in (-1, 1)");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(correlation_matrix(*this), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 1e-12))
        throw InvalidInput("correlation matrix is not positive definite");
    x.validate();
    y.validate();
    z.validate();
}

GeneratedPopulation generate_population(const GeneratorSpec& spec, std::uint64_t master_seed) {
    spec.validate();
    const Eigen::Matrix3d L = correlation_matrix(spec).llt().matrixL();
    CounterRng rng(SeedSpec{master_seed, std::numeric_limits<std::uint64_t>::max()});
    std::vector<double> x(spec.N), y(spec.N), z(spec.N);
    for (std::size_t i = 0; i < spec.N; ++i) {
        Eigen::Vector3d e;
        e << rng.normal(), rng.normal(), rng.normal();
        const Eigen::Vector3d t = L * e;
        x[i] = spec.x.from_standard_normal(t[0]);
        y[i] = spec.y.from_standard_normal(t[1]);
        z[i] = spec.z.from_standard_normal(t[2]);
    }
    MarginalDensities d{spec.x.density_at_median(), spec.y.density_at_median(), spec.z.density_at_median()};
    return {Population(std::move(x), std::move(y), std::move(z)), d};
}

void SimConfig::validate() const {
    if (population_csv.has_value() == generator.has_value())
        throw InvalidInput("simulation needs exactly one of a population file or a generator");
    if (generator) generator->validate();
    if (m < 2 || m >= n) throw InvalidInput("simulation requires 2 <= m < n");
    if (generator && n > generator->N) throw InvalidInput("simulation requires n <= N");
    if (replicates < 1) throw InvalidInput("simulation requires at least one replicate");
    if (estimators.empty()) throw InvalidInput("no estimators requested");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
}

namespace {

std::string_view family_name(MarginalFamily f) { return f == MarginalFamily::Normal ? "normal" : "lognormal"; }

nlohmann::json marginal_json(const MarginalSpec& s) {
    return {{"family", family_name(s.family)}, {"mu", s.mu}, {"sigma", s.sigma}};
}

}  // namespace

nlohmann::json config_to_json(const SimConfig& c) {
    nlohmann::json j;
    if (c.population_csv) j["population_csv"] = c.population_csv->string();
    if (c.generator) {
        const auto& g = *c.generator;
        j["generator"] = {{"N", g.N},         {"r_xy", g.r_xy},           {"r_yz", g.r_yz},
                          {"r_xz", g.r_xz},   {"x", marginal_json(g.x)}, {"y", marginal_json(g.y)},
                          {"z", marginal_json(g.z)}};
    }
    j["m"] = c.m;
    j["n"] = c.n;
    j["replicates"] = c.replicates;
    j["master_seed"] = c.master_seed;
    auto& ids = j["estimators"] = nlohmann::json::array();
    for (auto id : c.estimators) ids.push_back(to_string(id));
    return j;
}

std::string config_hash(const SimConfig& c) { return sha256_hex(config_to_json(c).dump()); }

const EstimatorStats& SimReport::at(EstimatorId id) const {
    for (const auto& s : stats) {
        if (s.id == id) return s;
    }
    throw InvalidInput("estimator '" + std::string(to_string(id)) + "' not in report");
}

std::optional<double> theory_variance(EstimatorId id, const DesignSizes& sizes, const PopulationSummary& truth) {
    const auto assoc = AssociationSet::from_summary(truth);
    const auto comps = variance_components(assoc);
    switch (id) {
    case EstimatorId::Median: return var_sample_median(sizes, comps);
    case EstimatorId::RatioDouble: return var_class_g(sizes, assoc, -1.0, 0.0);
    case EstimatorId::RegX:
    case EstimatorId::RegXOpt: return min_var_H(sizes, comps);
    case EstimatorId::FLinear:
    case EstimatorId::FLinearOpt: return min_var_F(sizes, comps);
    case EstimatorId::RatioKnown:
    case EstimatorId::Position:
    case EstimatorId::Stratified: return std::nullopt;
    default: return min_var_g(sizes, comps);
    }
}

namespace {

// Neumaier compensated sum.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            c += (sum - t) + v;
        else
            c += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

struct ReplicateResult {
    std::vector<double> values;  // NaN marks a failure
    std::vector<unsigned char> flags;  // bit 0 clamped, bit 1 fallback
    std::vector<std::string> errors;   // only filled on failure
};

constexpr unsigned char kClamped = 1;
constexpr unsigned char kFallback = 2;

}  // namespace

SimReport run_simulation(const SimConfig& config, const Population& pop, const PopulationSummary& truth) {
    config.validate();
    const std::size_t N = pop.size();
    if (config.n > N) throw InvalidInput("simulation requires n <= N");
    const DesignSizes sizes{config.m, config.n, N};

    std::optional<Coefficients> true_coeffs;
    std::string true_coeff_error;
    try {
        true_coeffs = optimal_coefficients(truth);
    } catch (const std::exception& e) {
        true_coeff_error = e.what();
    }

    const std::size_t K = config.estimators.size();
    const std::size_t R = config.replicates;
    std::vector<ReplicateResult> results(R);

    auto run_one = [&](std::size_t r) {
        auto& res = results[r];
        res.values.assign(K, std::numeric_limits<double>::quiet_NaN());
        res.flags.assign(K, 0);
        res.errors.assign(K, {});
        const auto sample = draw_two_phase(N, config.n, config.m, SeedSpec{config.master_seed, r});
        const auto view = SampleView::from_population(pop, sample, truth.median_x, truth.median_z);
        EstimatorContext ctx(view, true_coeffs ? &*true_coeffs : nullptr);
        for (std::size_t k = 0; k < K; ++k) {
            const auto id = config.estimators[k];
            if (needs_true_coefficients(id) && !true_coeffs) {
                res.errors[k] = true_coeff_error;
                continue;
            }
            const auto out = ctx.evaluate(id);
            if (out.value) {
                res.values[k] = *out.value;
            } else {
                res.errors[k] = out.error;
            }
            res.flags[k] = static_cast<unsigned char>((out.clamped ? kClamped : 0) | (out.fallback ? kFallback : 0));
        }
    };

    const unsigned T = static_cast<unsigned>(std::min<std::size_t>(config.threads, R));
    if (T <= 1) {
        for (std::size_t r = 0; r < R; ++r) run_one(r);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(T);
        for (unsigned t = 0; t < T; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t r = t; r < R; r += T) run_one(r);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    SimReport rep;
    rep.config = config;
    rep.config_hash = config_hash(config);
    rep.N = N;
    rep.true_median = truth.median_y;
    rep.summary = truth;
    rep.components = variance_components(truth);
    const double M = truth.median_y;

    for (std::size_t k = 0; k < K; ++k) {
        EstimatorStats s;
        s.id = config.estimators[k];
        CompensatedSum sum_v, sum_e, sum_e2;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& res = results[r];
            if (res.flags[k] & kClamped) ++s.clamps;
            if (res.flags[k] & kFallback) ++s.fallbacks;
            const double v = res.values[k];
            if (std::isnan(v)) {
                ++s.failures;
                if (s.first_error.empty()) s.first_error = res.errors[k];
                continue;
            }
            ++s.n_ok;
            const double e = v - M;
            sum_v.add(v);
            sum_e.add(e);
            sum_e2.add(e * e);
        }
        if (s.n_ok > 0) {
            const double cnt = static_cast<double>(s.n_ok);
            s.mean = sum_v.value() / cnt;
            s.bias = sum_e.value() / cnt;
            s.rel_bias = M != 0.0 ? s.bias / M : std::numeric_limits<double>::quiet_NaN();
            s.mse = sum_e2.value() / cnt;
            if (s.n_ok > 1) {
                CompensatedSum dev2;
                for (std::size_t r = 0; r < R; ++r) {
                    const double v = results[r].values[k];
                    if (std::isnan(v)) continue;
                    const double d = (v - M) * (v - M) - s.mse;
                    dev2.add(d * d);
                }
                s.mse_se = std::sqrt(dev2.value() / (cnt - 1.0) / cnt);
            }
        } else {
            s.mean = s.bias = s.rel_bias = s.mse = s.mse_se = std::numeric_limits<double>::quiet_NaN();
        }
        s.theory_variance = theory_variance(s.id, sizes, truth);
        if (s.theory_variance && *s.theory_variance > 0.0 && s.n_ok > 0)
            s.mse_over_theory = s.mse / *s.theory_variance;
        s.flagged = static_cast<double>(s.failures) > 0.05 * static_cast<double>(R);
        if (s.flagged) rep.valid = false;
        rep.stats.push_back(std::move(s));
    }
    return rep;
}

SimReport run_simulation(const SimConfig& config) {
    config.validate();
    if (config.generator) {
        auto gen = generate_population(*config.generator, config.master_seed);
        const auto truth = population_summary(gen.population, gen.densities);
        return run_simulation(config, gen.population, truth);
    }
    const auto pop = read_population_csv(*config.population_csv);
    const auto truth = population_summary(pop);
    return run_simulation(config, pop, truth);
}

namespace {

nlohmann::json pm_json(const ProportionMatrix& pm) {
    return {{"p11", pm.p11()}, {"p12", pm.p12()}, {"p21", pm.p21()}, {"p22", pm.p22()},
            {"counts", {pm.n11, pm.n12, pm.n21, pm.n22}}, {"total", pm.total}};
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const PopulationSummary& s) {
    return {{"N", s.N},
            {"median", {{"x", s.median_x}, {"y", s.median_y}, {"z", s.median_z}}},
            {"density_at_median", {{"x", s.density_x}, {"y", s.density_y}, {"z", s.density_z}}},
            {"density_source", s.density_source == DensitySource::Analytic ? "analytic" : "census-kde"},
            {"pm_xy", pm_json(s.pm_xy)},
            {"pm_xz", pm_json(s.pm_xz)},
            {"pm_yz", pm_json(s.pm_yz)},
            {"quantile_convention", "left-continuous inverse ECDF"}};
}

nlohmann::json to_json(const VarianceComponents& c) {
    return {{"V0", c.V0}, {"V1", c.V1}, {"V2", c.V2}, {"V3", c.V3}};
}

nlohmann::json to_json(const SimReport& rep) {
    nlohmann::json j;
    j["config"] = config_to_json(rep.config);
    j["provenance"] = {{"master_seed", rep.config.master_seed}, {"config_hash", rep.config_hash}};
    j["N"] = rep.N;
    j["true_median_y"] = rep.true_median;
    j["summary"] = to_json(rep.summary);
    j["components"] = to_json(rep.components);
    j["valid"] = rep.valid;
    auto& arr = j["estimators"] = nlohmann::json::array();
    for (const auto& s : rep.stats) {
        nlohmann::json e = {{"id", to_string(s.id)},
                            {"n_ok", s.n_ok},
                            {"failures", s.failures},
                            {"clamps", s.clamps},
                            {"fallbacks", s.fallbacks},
                            {"mean", s.mean},
                            {"bias", s.bias},
                            {"rel_bias", s.rel_bias},
                            {"mse", s.mse},
                            {"mse_se", s.mse_se},
                            {"theory_variance", optional_json(s.theory_variance)},
                            {"mse_over_theory", optional_json(s.mse_over_theory)},
                            {"flagged", s.flagged}};
        if (!s.first_error.empty()) e["first_error"] = s.first_error;
        arr.push_back(std::move(e));
    }
    return j;
}

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace

void write_csv(std::ostream& out, const SimReport& rep) {
    out << "estimator,n_ok,failures,clamps,fallbacks,mean,bias,rel_bias,mse,mse_se,theory_variance,"
           "mse_over_theory,flagged\n";
    for (const auto& s : rep.stats) {
        out << to_string(s.id) << ',' << s.n_ok << ',' << s.failures << ',' << s.clamps << ',' << s.fallbacks << ','
            << num(s.mean) << ',' << num(s.bias) << ',' << num(s.rel_bias) << ',' << num(s.mse) << ','
            << num(s.mse_se) << ',' << num(s.theory_variance) << ',' << num(s.mse_over_theory) << ','
            << (s.flagged ? "true" : "false") << '\n';
    }
}

}  // namespace dsmedian
