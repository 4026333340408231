#include "dsmedian/cli.hpp"

#include "dsmedian/allocation.hpp"
#include "dsmedian/digest.hpp"
#include "dsmedian/error.hpp"
#include "dsmedian/estimators.hpp"
#include "dsmedian/montecarlo.hpp"
#include "dsmedian/population.hpp"
#include "dsmedian/sampling.hpp"
#include "dsmedian/variance_theory.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#ifndef DSMEDIAN_VERSION
#define DSMEDIAN_VERSION "0.0.0"
#endif

namespace dsmedian {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

constexpr const char* kSeedEnv = "DSMEDIAN_SEED";

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty()) throw InvalidInput(what + ": invalid seed '" + text + "'");
    return v;
}

std::string timestamp_utc() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        t = static_cast<std::time_t>(parse_seed(sde, "SOURCE_DATE_EPOCH"));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Manifest {
    std::string subcommand;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::vector<fs::path> inputs;

    json to_json() const {
        json j;
        j["subcommand"] = subcommand;
        j["config"] = config;
        j["master_seed"] = seed ? json(*seed) : json(nullptr);
        auto& in = j["inputs"] = json::array();
        for (const auto& p : inputs) in.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
        j["tool_version"] = DSMEDIAN_VERSION;
        j["timestamp"] = timestamp_utc();
        return j;
    }
};

struct Outputs {
    std::string json_path;
    std::string csv_path;
};

void emit(const json& doc, const std::string& csv, const Outputs& o, std::ostream& out) {
    const std::string text = doc.dump(2) + "\n";
    if (o.json_path.empty()) {
        out << text;
    } else {
        std::ofstream f(o.json_path, std::ios::binary);
        if (!(f << text)) throw InvalidInput("cannot write '" + o.json_path + "'");
    }
    if (!o.csv_path.empty()) {
        std::ofstream f(o.csv_path, std::ios::binary);
        if (!(f << "# manifest " << doc.at("manifest").dump() << "\n" << csv))
            throw InvalidInput("cannot write '" + o.csv_path + "'");
    }
}

std::string csv_num(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::vector<EstimatorId> parse_estimator_list(const std::string& text, const std::vector<EstimatorId>& all) {
    if (text.empty() || text == "all") return all;
    std::vector<EstimatorId> ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        item = item.substr(b, e - b + 1);
        const auto id = parse_estimator(item);
        if (!id || std::find(all.begin(), all.end(), *id) == all.end())
            throw InvalidInput("unknown estimator '" + item + "'");
        ids.push_back(*id);
    }
    if (ids.empty()) throw InvalidInput("no estimators requested");
    return ids;
}

std::optional<std::uint64_t> env_seed() {
    if (const char* s = std::getenv(kSeedEnv)) return parse_seed(s, kSeedEnv);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::string csv;
    Outputs outputs;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    const auto pop = read_population_csv(a.csv);
    const auto summary = population_summary(pop);

    Manifest man;
    man.subcommand = "analyze";
    man.config = {{"population_csv", a.csv}};
    man.inputs = {a.csv};

    json doc;
    doc["manifest"] = man.to_json();
    doc["summary"] = to_json(summary);
    std::string comp_csv;
    try {
        const auto comps = variance_components(summary);
        doc["components"] = to_json(comps);
        comp_csv = "V0," + csv_num(comps.V0) + "\nV1," + csv_num(comps.V1) + "\nV2," + csv_num(comps.V2) +
                   "\nV3," + csv_num(comps.V3) + "\n";
    } catch (const DegenerateModel& e) {
        doc["components"] = nullptr;
        doc["components_error"] = e.what();
    }

    std::ostringstream csv;
    csv << "quantity,value\n"
        << "N," << summary.N << "\n"
        << "median_x," << csv_num(summary.median_x) << "\nmedian_y," << csv_num(summary.median_y)
        << "\nmedian_z," << csv_num(summary.median_z) << "\ndensity_x," << csv_num(summary.density_x)
        << "\ndensity_y," << csv_num(summary.density_y) << "\ndensity_z," << csv_num(summary.density_z)
        << "\np11_xy," << csv_num(summary.pm_xy.p11()) << "\np11_xz," << csv_num(summary.pm_xz.p11())
        << "\np11_yz," << csv_num(summary.pm_yz.p11()) << "\n"
        << comp_csv;
    emit(doc, csv.str(), a.outputs, out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string csv;
    std::size_t m = 0;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;
    std::string estimators;
    Outputs outputs;
};

json coefficients_json(const Coefficients& c) {
    return {{"d1", c.d1},         {"d2", c.d2},         {"alpha1", c.alpha1}, {"alpha2", c.alpha2},
            {"alpha1_star", c.alpha1_star}, {"alpha2_star", c.alpha2_star}, {"a1", c.a1},
            {"a2", c.a2},         {"a3", c.a3}};
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
    const auto ids = parse_estimator_list(a.estimators, sample_estimators());
    const auto pop = read_population_csv(a.csv);
    const std::size_t N = pop.size();
    if (!(a.m >= 2 && a.m < a.n && a.n <= N)) throw InvalidInput("estimate requires 2 <= m < n <= N");
    const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);

    const double mx = sample_median(pop.x());
    const double mz = sample_median(pop.z());
    const auto sample = draw_two_phase(N, a.n, a.m, SeedSpec{seed, 0});
    const auto view = SampleView::from_population(pop, sample, mx, mz);
    EstimatorContext ctx(view);

    Manifest man;
    man.subcommand = "estimate";
    man.seed = seed;
    json cfg = {{"population_csv", a.csv}, {"m", a.m}, {"n", a.n}, {"stream_id", 0}};
    auto& cfg_ids = cfg["estimators"] = json::array();
    for (auto id : ids) cfg_ids.push_back(to_string(id));
    man.config = cfg;
    man.inputs = {a.csv};

    json doc;
    doc["manifest"] = man.to_json();
    doc["design"] = {{"N", N}, {"m", a.m}, {"n", a.n}};
    const auto& med = view.medians();
    doc["sample_medians"] = {{"y", med.y}, {"x", med.x}, {"x_first", med.x_first}, {"z", med.z},
                             {"z_first", med.z_first}};
    doc["known_medians"] = {{"x", mx}, {"z", mz}};
    std::string coeff_error;
    if (const auto* c = ctx.plugin(&coeff_error)) {
        doc["plugin_coefficients"] = coefficients_json(*c);
    } else {
        doc["plugin_coefficients"] = nullptr;
        doc["plugin_error"] = coeff_error;
    }

    std::ostringstream csv;
    csv << "estimator,value,error,clamped,fallback\n";
    auto& arr = doc["estimates"] = json::array();
    for (auto id : ids) {
        const auto r = ctx.evaluate(id);
        json e = {{"id", to_string(id)},
                  {"value", r.value ? json(*r.value) : json(nullptr)},
                  {"clamped", r.clamped},
                  {"fallback", r.fallback}};
        if (!r.value) e["error"] = r.error;
        arr.push_back(std::move(e));
        csv << to_string(id) << ',' << (r.value ? csv_num(*r.value) : "") << ',' << csv_field(r.error) << ','
            << (r.clamped ? "true" : "false") << ',' << (r.fallback ? "true" : "false") << '\n';
    }
    emit(doc, csv.str(), a.outputs, out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config_path;
    std::optional<std::size_t> m, n, replicates;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> estimators;
    Outputs outputs;
    bool json_flag = false;
    bool csv_flag = false;
};

MarginalSpec read_marginal(const pt::ptree& g, const std::string& var, double mu, double sigma) {
    MarginalSpec s;
    const auto family = g.get<std::string>(var + "_family", "normal");
    if (family == "normal") {
        s.family = MarginalFamily::Normal;
    } else if (family == "lognormal") {
        s.family = MarginalFamily::Lognormal;
    } else {
        throw InvalidInput("generator." + var + "_family must be normal or lognormal");
    }
    s.mu = g.get<double>(var + "_mu", mu);
    s.sigma = g.get<double>(var + "_sigma", sigma);
    return s;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    pt::ptree ini;
    try {
        pt::read_ini(a.config_path, ini);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }

    SimConfig c;
    Outputs outputs = a.outputs;
    try {
        if (auto p = ini.get_optional<std::string>("population.csv")) {
            fs::path path(*p);
            if (path.is_relative()) path = fs::path(a.config_path).parent_path() / path;
            c.population_csv = path;
        }
        if (auto g = ini.get_child_optional("generator")) {
            GeneratorSpec spec;
            spec.N = g->get<std::size_t>("N");
            spec.r_xy = g->get<double>("r_xy");
            spec.r_yz = g->get<double>("r_yz");
            spec.r_xz = g->get<double>("r_xz");
            spec.x = read_marginal(*g, "x", 0.0, 1.0);
            spec.y = read_marginal(*g, "y", 0.0, 1.0);
            spec.z = read_marginal(*g, "z", 0.0, 1.0);
            c.generator = spec;
        }
        c.m = a.m ? *a.m : ini.get<std::size_t>("design.m");
        c.n = a.n ? *a.n : ini.get<std::size_t>("design.n");
        c.replicates = a.replicates ? *a.replicates : ini.get<std::size_t>("design.replicates");
        c.threads = a.threads ? *a.threads : ini.get<unsigned>("run.threads", 1);
        const auto est = a.estimators ? *a.estimators : ini.get<std::string>("run.estimators", "all");
        c.estimators = parse_estimator_list(est, all_estimators());
        if (a.seed) {
            c.master_seed = *a.seed;
        } else if (auto s = ini.get_optional<std::string>("run.seed")) {
            c.master_seed = parse_seed(*s, "run.seed");
        } else {
            c.master_seed = env_seed().value_or(0);
        }
        if (!a.json_flag) outputs.json_path = ini.get<std::string>("run.output", "");
        if (!a.csv_flag) outputs.csv_path = ini.get<std::string>("run.csv", "");
    } catch (const pt::ptree_error& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }

    const auto report = run_simulation(c);

    Manifest man;
    man.subcommand = "simulate";
    man.config = config_to_json(c);
    man.config["threads"] = c.threads;
    man.seed = c.master_seed;
    man.inputs = {a.config_path};
    if (c.population_csv) man.inputs.push_back(*c.population_csv);

    json doc;
    doc["manifest"] = man.to_json();
    doc["report"] = to_json(report);
    std::ostringstream csv;
    write_csv(csv, report);
    emit(doc, csv.str(), outputs, out);
    if (!report.valid) {
        err << "warning: more than 5% of replicates failed for at least one estimator; report flagged invalid\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// allocate / compare

struct CostArgs {
    CostModel cost;
    VarianceComponents comps;
    std::optional<std::size_t> N;
    std::string population;
    Outputs outputs;
};

struct AllocateArgs {
    CostArgs base;
    std::string strategy;
    bool oracle = false;
};

// Resolves components and N, from a population file when given.
std::size_t resolve_design(CostArgs& a, Manifest& man) {
    std::size_t N = 0;
    if (!a.population.empty()) {
        const auto pop = read_population_csv(a.population);
        a.comps = variance_components(population_summary(pop));
        N = a.N ? *a.N : pop.size();
        man.inputs.push_back(a.population);
    } else {
        if (!a.N) throw InvalidInput("--N is required without --population");
        N = *a.N;
    }
    man.config = {{"C0", a.cost.C0}, {"C1", a.cost.C1}, {"C2", a.cost.C2}, {"C3", a.cost.C3},
                  {"V0", a.comps.V0}, {"V1", a.comps.V1}, {"V2", a.comps.V2}, {"V3", a.comps.V3},
                  {"N", N}};
    if (!a.population.empty()) man.config["population_csv"] = a.population;
    return N;
}

json allocation_json(const AllocationResult& r) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j = {{"strategy", to_string(r.strategy)},
              {"m_real", num(r.m_real)},
              {"n_real", num(r.n_real)},
              {"m_int", r.m_int},
              {"n_int", r.n_int},
              {"opt_variance", num(r.opt_variance)},
              {"opt_variance_large_n", num(r.opt_variance_large_n)},
              {"int_variance", num(r.int_variance)},
              {"feasible", r.feasible},
              {"verdict", r.feasible ? "feasible" : "infeasible"}};
    if (!r.feasible) j["reason"] = r.reason;
    return j;
}

std::string allocation_csv_row(const AllocationResult& r) {
    return std::string(to_string(r.strategy)) + ',' + csv_num(r.m_real) + ',' + csv_num(r.n_real) + ',' +
           std::to_string(r.m_int) + ',' + std::to_string(r.n_int) + ',' + csv_num(r.opt_variance) + ',' +
           csv_num(r.opt_variance_large_n) + ',' + csv_num(r.int_variance) + ',' +
           (r.feasible ? "true" : "false") + ',' + csv_field(r.reason) + '\n';
}

constexpr const char* kAllocationCsvHeader =
    "strategy,m_real,n_real,m_int,n_int,opt_variance,opt_variance_large_n,int_variance,feasible,reason\n";

int cmd_allocate(AllocateArgs a, std::ostream& out, std::ostream& err) {
    const Strategy s = parse_strategy(a.strategy);
    Manifest man;
    man.subcommand = "allocate";
    const std::size_t N = resolve_design(a.base, man);
    man.config["strategy"] = to_string(s);
    man.config["oracle"] = a.oracle;

    const auto r = allocate(s, a.base.cost, a.base.comps, N);
    json doc;
    doc["manifest"] = man.to_json();
    doc["cost_ordering_holds"] = a.base.cost.ordering_holds();
    doc["allocation"] = allocation_json(r);
    std::string csv = std::string(kAllocationCsvHeader) + allocation_csv_row(r);

    int code = r.feasible ? kExitOk : kExitInfeasible;
    if (a.oracle && r.feasible) {
        const auto g = grid_search_allocation(a.base.cost, a.base.comps, N, s);
        const double rel_gap = g.feasible ? (g.int_variance - r.opt_variance) / std::abs(r.opt_variance)
                                          : std::numeric_limits<double>::quiet_NaN();
        const auto dm = static_cast<long long>(g.m_int) - static_cast<long long>(r.m_int);
        const auto dn = static_cast<long long>(g.n_int) - static_cast<long long>(r.n_int);
        const bool agree = g.feasible && std::abs(rel_gap) <= 0.005 && std::llabs(dm) <= 1 && std::llabs(dn) <= 1;
        doc["oracle"] = {{"grid", allocation_json(g)},
                         {"variance_rel_gap", std::isfinite(rel_gap) ? json(rel_gap) : json(nullptr)},
                         {"dm", dm},
                         {"dn", dn},
                         {"agree", agree}};
        csv += allocation_csv_row(g);
        if (!agree) {
            err << "error: grid oracle disagrees with the closed-form allocation\n";
            code = kExitOracle;
        }
    }
    if (!r.feasible) err << "error: allocation infeasible: " << r.reason << "\n";
    emit(doc, csv, a.base.outputs, out);
    return code;
}

int cmd_compare(CostArgs a, std::ostream& out) {
    Manifest man;
    man.subcommand = "compare";
    const std::size_t N = resolve_design(a, man);
    const auto rep = profitability_report(a.cost, a.comps, N);

    json doc;
    doc["manifest"] = man.to_json();
    doc["cost_ordering_holds"] = rep.cost_ordering_holds;
    doc["allocations"] = {allocation_json(rep.single), allocation_json(rep.H), allocation_json(rep.g),
                          allocation_json(rep.F)};
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    std::ostringstream csv;
    csv << "comparison,verdict,challenger_variance,baseline_variance,closed_lhs,closed_rhs,closed_holds\n";
    auto& arr = doc["comparisons"] = json::array();
    for (const auto& c : rep.comparisons) {
        arr.push_back({{"name", c.name},
                       {"challenger", to_string(c.challenger)},
                       {"baseline", to_string(c.baseline)},
                       {"verdict", to_string(c.verdict)},
                       {"challenger_variance", num(c.challenger_variance)},
                       {"baseline_variance", num(c.baseline_variance)},
                       {"closed_form", {{"lhs", num(c.closed_lhs)},
                                        {"rhs", num(c.closed_rhs)},
                                        {"available", c.closed_available},
                                        {"holds", c.closed_holds}}}});
        csv << c.name << ',' << to_string(c.verdict) << ',' << csv_num(c.challenger_variance) << ','
            << csv_num(c.baseline_variance) << ',' << csv_num(c.closed_lhs) << ',' << csv_num(c.closed_rhs) << ','
            << (c.closed_available ? (c.closed_holds ? "true" : "false") : "") << '\n';
    }
    emit(doc, csv.str(), a.outputs, out);
    return kExitOk;
}

void add_outputs(CLI::App* sub, Outputs& o) {
    sub->add_option("-o,--output", o.json_path, "Write the JSON report here instead of stdout");
    sub->add_option("--csv", o.csv_path, "Also write the tabular CSV mirror here");
}

void add_cost_options(CLI::App* sub, CostArgs& a) {
    sub->add_option("--C0", a.cost.C0, "Total budget")->required();
    sub->add_option("--C1", a.cost.C1, "Unit cost of y (second phase)")->required();
    sub->add_option("--C2", a.cost.C2, "Unit cost of x (first phase)")->required();
    sub->add_option("--C3", a.cost.C3, "Unit cost of z (first phase)")->capture_default_str();
    auto* pop = sub->add_option("--population", a.population, "Population CSV to derive V0..V3 (and N) from");
    sub->add_option("--V0", a.comps.V0, "Variance component V0")->excludes(pop);
    sub->add_option("--V1", a.comps.V1, "Variance component V1")->excludes(pop);
    sub->add_option("--V2", a.comps.V2, "Variance component V2")->excludes(pop);
    sub->add_option("--V3", a.comps.V3, "Variance component V3")->excludes(pop);
    sub->add_option("--N", a.N, "Population size");
    add_outputs(sub, a.outputs);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Population-median estimation under two-phase sampling with two auxiliaries", "dsmedian"};
    app.set_version_flag("--version", DSMEDIAN_VERSION);
    app.require_subcommand(1);

    AnalyzeArgs analyze;
    auto* c_analyze = app.add_subcommand("analyze", "Population medians, densities, quadrant tables and V0..V3");
    c_analyze->add_option("population", analyze.csv, "Population CSV with columns x, y, z")->required();
    add_outputs(c_analyze, analyze.outputs);

    EstimateArgs estimate;
    auto* c_estimate = app.add_subcommand("estimate", "One two-phase draw and every requested estimate");
    c_estimate->add_option("population", estimate.csv, "Population CSV with columns x, y, z")->required();
    c_estimate->add_option("--m", estimate.m, "Second-phase size")->required();
    c_estimate->add_option("--n", estimate.n, "First-phase size")->required();
    c_estimate->add_option("--seed", estimate.seed, std::string("Master seed (default: $") + kSeedEnv + ", else 0)");
    c_estimate->add_option("--estimators", estimate.estimators, "Comma-separated estimator ids, or 'all'");
    add_outputs(c_estimate, estimate.outputs);

    SimulateArgs simulate;
    auto* c_simulate = app.add_subcommand("simulate", "Replicated two-phase sampling experiment from a config file");
    c_simulate->add_option("config", simulate.config_path, "INI config file")->required();
    c_simulate->add_option("--m", simulate.m, "Override design.m");
    c_simulate->add_option("--n", simulate.n, "Override design.n");
    c_simulate->add_option("--replicates", simulate.replicates, "Override design.replicates");
    c_simulate->add_option("--seed", simulate.seed, "Override run.seed");
    c_simulate->add_option("--threads", simulate.threads, "Worker threads (results do not depend on it)");
    c_simulate->add_option("--estimators", simulate.estimators, "Override run.estimators");
    auto* sim_json = c_simulate->add_option("-o,--output", simulate.outputs.json_path, "Override run.output");
    auto* sim_csv = c_simulate->add_option("--csv", simulate.outputs.csv_path, "Override run.csv");

    AllocateArgs allocate_args;
    auto* c_allocate = app.add_subcommand("allocate", "Cost-optimal (m, n) for one strategy");
    add_cost_options(c_allocate, allocate_args.base);
    c_allocate->add_option("--strategy", allocate_args.strategy, "single, H, g or F")->required();
    c_allocate->add_flag("--oracle", allocate_args.oracle, "Cross-check against an exhaustive integer grid");

    CostArgs compare;
    auto* c_compare = app.add_subcommand("compare", "Profitability verdicts across strategies");
    add_cost_options(c_compare, compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*c_analyze) return cmd_analyze(analyze, out);
        if (*c_estimate) return cmd_estimate(estimate, out);
        if (*c_simulate) {
            simulate.json_flag = sim_json->count() > 0;
            simulate.csv_flag = sim_csv->count() > 0;
            return cmd_simulate(simulate, out, err);
        }
        if (*c_allocate) return cmd_allocate(allocate_args, out, err);
        if (*c_compare) return cmd_compare(compare, out);
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const DegenerateModel& e) {
        err << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace dsmedian
