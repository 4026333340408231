#include "dsmedian/cli.hpp"
#include "dsmedian/core_stats.hpp"
#include "dsmedian/montecarlo.hpp"

#include <doctest.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace dsmedian;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
    json doc() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "dsmedian");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch() {
    const auto dir = fs::temp_directory_path() / "dsmedian_cli_test";
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const auto p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

fs::path gaussian_csv(std::size_t N = 200) {
    GeneratorSpec g;
    g.N = N;
    g.r_xy = 0.8;
    g.r_yz = 0.6;
    g.r_xz = 0.7;
    g.x = {MarginalFamily::Normal, 50, 10};
    g.y = {MarginalFamily::Normal, 100, 20};
    g.z = {MarginalFamily::Normal, 30, 5};
    const auto pop = generate_population(g, 17).population;
    std::ostringstream s;
    s.precision(17);
    s << "x,y,z\n";
    for (std::size_t i = 0; i < N; ++i) s << pop.x()[i] << ',' << pop.y()[i] << ',' << pop.z()[i] << '\n';
    return write_file("gauss" + std::to_string(N) + ".csv", s.str());
}

const std::string kConfigDir = DSMEDIAN_CONFIG_DIR;

}  // namespace

TEST_CASE("usage errors exit with the input code") {
    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"estimate", "p.csv"}).code == 2);  // --m, --n missing
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("analyze") != std::string::npos);
}

TEST_CASE("analyze") {
    const auto same = write_file("same.csv", "x,y,z\n1,1,1\n2,2,2\n3,3,3\n4,4,4\n5,5,5\n");
    const auto r = run({"analyze", same.string()});
    REQUIRE(r.code == 0);
    const auto d = r.doc();
    CHECK(d["summary"]["median"]["x"] == 3.0);
    CHECK(d["summary"]["median"]["y"] == 3.0);
    CHECK(d["summary"]["pm_xy"]["p11"] == 0.6);
    CHECK(d["components"].is_null());
    CHECK(d["components_error"] == "auxiliary collinearity");
    CHECK(d["manifest"]["subcommand"] == "analyze");
    CHECK(d["manifest"]["timestamp"] == "2023-11-14T22:13:20Z");
    CHECK(d["manifest"]["inputs"][0]["sha256"].get<std::string>().size() == 64);
    CHECK(run({"analyze", same.string()}).out == r.out);

    const auto gauss = gaussian_csv();
    const auto g = run({"analyze", gauss.string()}).doc();
    CHECK(g["components"]["V0"].get<double>() > 0.0);
    CHECK(g["summary"]["density_source"] == "census-kde");

    const auto no_z = write_file("noz.csv", "x,y\n1,2\n");
    const auto bad = run({"analyze", no_z.string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("missing column 'z'") != std::string::npos);
    CHECK(run({"analyze", (scratch() / "absent.csv").string()}).code == 2);
}

TEST_CASE("analyze writes JSON and a CSV mirror with its manifest") {
    const auto gauss = gaussian_csv();
    const auto json_path = scratch() / "analyze.json", csv_path = scratch() / "analyze.csv";
    const auto r = run({"analyze", gauss.string(), "-o", json_path.string(), "--csv", csv_path.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    std::ifstream jf(json_path), cf(csv_path);
    const auto doc = json::parse(jf);
    std::string first;
    std::getline(cf, first);
    REQUIRE(first.rfind("# manifest ", 0) == 0);
    CHECK(json::parse(first.substr(11)) == doc["manifest"]);
    std::string header;
    std::getline(cf, header);
    CHECK(header == "quantity,value");
}

TEST_CASE("estimate") {
    const auto gauss = gaussian_csv();
    const auto r = run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--seed", "5"});
    REQUIRE(r.code == 0);
    const auto d = r.doc();
    CHECK(d["estimates"].size() == sample_estimators().size());
    CHECK(d["manifest"]["master_seed"] == 5);
    CHECK(run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--seed", "5"}).out == r.out);
    CHECK(run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--seed", "6"}).out != r.out);

    const auto med = run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--seed", "5", "--estimators",
                          "median"})
                         .doc();
    REQUIRE(med["estimates"].size() == 1);
    CHECK(med["estimates"][0]["value"] == d["sample_medians"]["y"]);

    // first phase is the whole population
    const auto census = run({"estimate", gauss.string(), "--m", "30", "--n", "200"}).doc();
    CHECK(census["sample_medians"]["x_first"] == census["known_medians"]["x"]);

    CHECK(run({"estimate", gauss.string(), "--m", "30", "--n", "201"}).code == 2);
    CHECK(run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--estimators", "nope"}).code == 2);
    CHECK(run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--estimators", "g1-opt"}).code == 2);
}

TEST_CASE("estimate seed comes from the environment when the flag is absent") {
    const auto gauss = gaussian_csv();
    ::setenv("DSMEDIAN_SEED", "5", 1);
    const auto env = run({"estimate", gauss.string(), "--m", "30", "--n", "90"}).doc();
    const auto flagged = run({"estimate", gauss.string(), "--m", "30", "--n", "90", "--seed", "9"}).doc();
    ::unsetenv("DSMEDIAN_SEED");
    const auto plain = run({"estimate", gauss.string(), "--m", "30", "--n", "90"}).doc();
    CHECK(env["manifest"]["master_seed"] == 5);
    CHECK(flagged["manifest"]["master_seed"] == 9);
    CHECK(plain["manifest"]["master_seed"] == 0);
}

TEST_CASE("estimate surfaces per-estimator errors") {
    // x and z concordant in every sample: plug-in coefficients are undefined
    const auto col = write_file("col.csv", "x,y,z\n1,3,1\n2,1,2\n3,4,3\n4,2,4\n5,6,5\n6,5,6\n7,8,7\n8,7,8\n");
    const auto d = run({"estimate", col.string(), "--m", "6", "--n", "8"}).doc();
    CHECK(d["plugin_coefficients"].is_null());
    CHECK(d["plugin_error"] == "collinear auxiliaries");
    bool median_ok = false, reg_failed = false;
    for (const auto& e : d["estimates"]) {
        if (e["id"] == "median") median_ok = e["value"].is_number();
        if (e["id"] == "reg-xz") reg_failed = e["value"].is_null() && e.contains("error");
    }
    CHECK(median_ok);
    CHECK(reg_failed);
}

TEST_CASE("simulate") {
    const auto smoke = kConfigDir + "/smoke.ini";
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run({"simulate", smoke});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 1.0);
    const auto d = r.doc();
    CHECK(d["manifest"]["master_seed"] == 7);
    CHECK(d["report"]["config"]["replicates"] == 1);
    CHECK(d["report"]["estimators"].size() == all_estimators().size());
    CHECK(run({"simulate", smoke}).out == r.out);

    const auto over = run({"simulate", smoke, "--seed", "8", "--replicates", "3", "--estimators", "median,reg-x",
                           "--threads", "2"})
                          .doc();
    CHECK(over["manifest"]["master_seed"] == 8);
    CHECK(over["report"]["config"]["replicates"] == 3);
    CHECK(over["report"]["estimators"].size() == 2);

    const auto bad = run({"simulate", kConfigDir + "/bad_correlation.ini"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("positive definite") != std::string::npos);
    CHECK(run({"simulate", (scratch() / "absent.ini").string()}).code == 2);
    const auto broken = write_file("broken.ini", "[design]\nm = 10\n");
    CHECK(run({"simulate", broken.string()}).code == 2);
}

TEST_CASE("simulate reads a population file relative to the config") {
    gaussian_csv(300);
    const auto ini = write_file("popsim.ini",
                                "[population]\ncsv = gauss300.csv\n[design]\nm = 20\nn = 60\nreplicates = 5\n"
                                "[run]\nseed = 1\nestimators = median,reg-xz\n");
    const auto csv_out = scratch() / "popsim.csv";
    const auto r = run({"simulate", ini.string(), "--csv", csv_out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.doc()["report"]["N"] == 300);
    CHECK(r.doc()["manifest"]["inputs"].size() == 2);
    std::ifstream cf(csv_out);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(cf, line)) ++lines;
    CHECK(lines == 4);  // manifest, header, two estimators
}

TEST_CASE("allocate") {
    const std::vector<std::string> worked = {"allocate", "--C0", "100", "--C1", "4",   "--C2", "1",
                                             "--V0",     "1",    "--V1", "0.64", "--N", "1000000"};
    auto args = worked;
    args.insert(args.end(), {"--strategy", "H", "--oracle"});
    const auto r = run(args);
    REQUIRE(r.code == 0);
    const auto d = r.doc();
    CHECK(d["allocation"]["m_int"] == 15);
    CHECK(d["allocation"]["n_int"] == 40);
    CHECK(d["allocation"]["verdict"] == "feasible");
    CHECK(d["oracle"]["agree"] == true);

    const auto infeasible = run({"allocate", "--C0", "5", "--C1", "4", "--C2", "1", "--V0", "1", "--V1", "0.64",
                                 "--N", "1000", "--strategy", "H"});
    CHECK(infeasible.code == 3);
    CHECK(infeasible.doc()["allocation"]["verdict"] == "infeasible");

    auto no_n = worked;
    no_n.erase(no_n.end() - 2, no_n.end());
    no_n.insert(no_n.end(), {"--strategy", "H"});
    CHECK(run(no_n).code == 2);
    auto bad_strategy = worked;
    bad_strategy.insert(bad_strategy.end(), {"--strategy", "Q"});
    CHECK(run(bad_strategy).code == 2);
    CHECK(run({"allocate", "--C0", "100", "--C1", "4", "--C2", "1", "--population", gaussian_csv().string(),
               "--strategy", "g"})
              .code != 2);
}

TEST_CASE("allocate reports an oracle disagreement with its own exit code") {
    // small budget: integer effects push the grid optimum away from the rounded closed form
    int disagreements = 0;
    for (double C0 : {20.0, 23.0, 27.0, 31.0, 37.0, 41.0}) {
        const auto r = run({"allocate", "--C0", std::to_string(C0), "--C1", "4", "--C2", "0.5", "--C3", "0.4",
                            "--V0", "1", "--V1", "0.9", "--V2", "0.1", "--N", "100000", "--strategy", "g",
                            "--oracle"});
        if (r.code == 4) {
            ++disagreements;
            CHECK(r.doc()["oracle"]["agree"] == false);
            CHECK(r.err.find("grid oracle disagrees") != std::string::npos);
        } else {
            CHECK((r.code == 0 || r.code == 3));
        }
    }
    CHECK(disagreements > 0);
}

TEST_CASE("compare") {
    const auto r = run({"compare", "--C0", "100", "--C1", "4", "--C2", "0.6", "--C3", "0.4", "--V0", "1", "--V1",
                        "0.64", "--V2", "0.36", "--N", "1000000"});
    REQUIRE(r.code == 0);
    const auto d = r.doc();
    CHECK(d["allocations"].size() == 4);
    CHECK(d["comparisons"][0]["name"] == "g-vs-single");
    CHECK(d["comparisons"][0]["verdict"] == "gain");
    CHECK(d["comparisons"][0]["closed_form"]["holds"] == true);
    CHECK(d["cost_ordering_holds"] == true);
}
