#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "catm/error.hpp"
#include "catm/probability_io.hpp"
#include "catm/scenario.hpp"

using namespace catm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& name) {
    std::ifstream f(std::string(CATM_SCENARIO_DIR) + "/" + name);
    return json::parse(f);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("catm_scenario_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string config_error_path(const json& doc) {
    try {
        parse_scenario(doc);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<accepted>";
}

json three_level(const std::string& mode) {
    json doc = read_json("rabi.json");
    doc["model"]["energies"] = {0.0, 0.25, 0.55};
    doc["model"]["dipole"] = {{0.0, 0.8, 0.1}, {0.8, 0.0, 0.6}, {0.1, 0.6, 0.0}};
    doc["model"]["bound_states"] = {0, 1, 2};
    doc["pulse"] = {{"E0", 0.1}, {"omega", 0.25}, {"phase", 0.0}, {"envelope", "gaussian"}, {"center", 20.0}, {"tau", 5.0}};
    doc["time_grid"] = {{"T0", 40.0}, {"dT", 40.0}, {"n_modes", 512}};
    doc["absorber"] = {{"V0", 0.8}};
    doc["representation"] = {{"mode", mode}};
    doc["solver"] = {{"method", "krylov"}};
    doc["run"] = {{"kind", "catm"}};
    return doc;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(CATM_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("configuration errors name the offending entry") {
    const json base = read_json("shipped.json");
    CHECK(config_error_path(base) == "<accepted>");

    json doc = base;
    doc["pulse"]["amplitude"] = 0.1;
    CHECK(config_error_path(doc) == "pulse.amplitude");

    doc = base;
    doc.erase("schema_version");
    CHECK(config_error_path(doc) == "schema_version");

    doc = base;
    doc["schema_version"] = 99;
    CHECK(config_error_path(doc) == "schema_version");

    doc = read_json("rabi.json");
    doc["run"] = {{"kind", "split"}, {"n_steps", 100}};
    CHECK(config_error_path(doc).rfind("run", 0) == 0);

    doc = base;
    doc["run"] = {{"kind", "oracle"}};
    CHECK(config_error_path(doc).rfind("run", 0) == 0);

    doc = read_json("rabi.json");
    doc["run"]["methods"] = {"catm"};
    CHECK(config_error_path(doc) == "run.methods");

    doc = read_json("shipped_multistep.json");
    doc["representation"]["mode"] = "direct";
    CHECK(config_error_path(doc) == "representation.mode");

    doc = base;
    doc["time_grid"]["n_modes"] = 300;
    CHECK(config_error_path(doc).rfind("time_grid", 0) == 0);

    doc = base;
    doc["absorber"]["V0"] = -1.0;
    CHECK(config_error_path(doc).rfind("absorber", 0) == 0);

    CHECK_THROWS_AS(load_scenario(CATM_SCENARIO_DIR "/missing.json"), ConfigError);
}

TEST_CASE("zero field leaves the initial state in place") {
    json doc = three_level("direct");
    doc["pulse"]["E0"] = 0.0;
    const fs::path dir = scratch("zero");
    const RunReport r = run_scenario(parse_scenario(doc), dir.string());
    REQUIRE(r.converged);
    const ProbabilitySeries p = read_probabilities((dir / "probabilities.csv").string());
    REQUIRE(p.size() > 1);
    for (size_t k = 0; k < p.size(); ++k) {
        CHECK(std::abs(p.populations(0, static_cast<Eigen::Index>(k)) - 1.0) < 1e-12);
        CHECK(std::abs(p.dissociation[k]) < 1e-12);
    }
    fs::remove_all(dir);
}

TEST_CASE("repeated runs write byte-identical files") {
    const ScenarioConfig cfg = parse_scenario(three_level("full"));
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const RunReport ra = run_scenario(cfg, a.string());
    const RunReport rb = run_scenario(cfg, b.string());
    REQUIRE(ra.converged);
    CHECK(ra.files == rb.files);
    for (const auto& f : ra.files)
        if (fs::path(f).extension() == ".csv") CHECK(slurp(a / f) == slurp(b / f));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("a single segment reproduces the single-shot solve") {
    const ScenarioConfig cfg = parse_scenario(three_level("real"));
    const PreparedModel model = prepare_model(cfg);
    const CatmRun single = run_catm(cfg, model);
    const MultistepRun multi = multistep_propagate(cfg, model);
    REQUIRE(multi.segments.size() == 1);
    REQUIRE(multi.series.states.cols() == single.series.states.cols());
    CHECK((multi.series.states - single.series.states).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(multi.segments[0].residual < 1e-10);
}

TEST_CASE("segments join continuously and track the single-shot solve") {
    json doc = three_level("real");
    doc["run"] = {{"kind", "multistep"}, {"segments", 2}};
    const ScenarioConfig cfg = parse_scenario(doc);
    const PreparedModel model = prepare_model(cfg);
    const CatmRun single = run_catm(cfg, model);
    const MultistepRun multi = multistep_propagate(cfg, model);
    REQUIRE(multi.segments.size() == 2);
    CHECK(multi.segments[1].join_mismatch < 1e-6);
    const Eigen::VectorXd a = single.series.states.col(single.series.states.cols() - 1).cwiseAbs2();
    const Eigen::VectorXd b = multi.series.states.col(multi.series.states.cols() - 1).cwiseAbs2();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-3 * a.maxCoeff());
    CHECK(std::abs(multi.series.times.back() - 40.0) < 1e-12);
}

TEST_CASE("compare runs write aligned per-method series") {
    const fs::path dir = scratch("compare");
    const RunReport r = run_scenario(load_scenario(CATM_SCENARIO_DIR "/rabi.json"), dir.string());
    REQUIRE(r.converged);
    for (const char* f : {"probabilities_oracle.csv", "probabilities_catm.csv", "probabilities_sod.csv", "compare.json"})
        CHECK(fs::exists(dir / f));
    const ProbabilitySeries o = read_probabilities((dir / "probabilities_oracle.csv").string());
    const ProbabilitySeries c = read_probabilities((dir / "probabilities_catm.csv").string());
    const ProbabilitySeries s = read_probabilities((dir / "probabilities_sod.csv").string());
    CHECK(o.times == c.times);
    CHECK(o.times == s.times);
    CHECK((o.populations - c.populations).cwiseAbs().maxCoeff() < 1e-8);
    const json cmp = json::parse(slurp(dir / "compare.json"));
    CHECK(cmp["methods"].contains("catm"));
    CHECK(cmp["methods"]["catm"]["max_absolute_deviation"].get<double>() < 1e-8);
    fs::remove_all(dir);
}

TEST_CASE("step methods and CATM agree on the two-surface model without the absorbing potential") {
    json doc = read_json("shipped.json");
    doc["model"]["cap"]["enabled"] = false;
    doc["run"] = {{"kind", "compare"}, {"methods", {"split", "catm", "sod"}}, {"n_steps", 100000}, {"record_every", 0}};
    const fs::path dir = scratch("surfaces");
    const RunReport r = run_scenario(parse_scenario(doc), dir.string());
    REQUIRE(r.converged);
    const ProbabilitySeries split = read_probabilities((dir / "probabilities_split.csv").string());
    int compared = 0;
    for (const char* other : {"probabilities_catm.csv", "probabilities_sod.csv"}) {
        const ProbabilitySeries p = read_probabilities((dir / other).string());
        const Eigen::Index last = p.populations.cols() - 1;
        for (Eigen::Index j = 0; j < p.populations.rows(); ++j) {
            const double ref = split.populations(j, last);
            if (ref < 1e-4) continue;
            ++compared;
            CHECK(std::abs(p.populations(j, last) - ref) < 1e-2 * ref);
        }
    }
    CHECK(compared >= 4);
    fs::remove_all(dir);
}

TEST_CASE("amplitude scans write one row per point and solver") {
    json doc = three_level("real");
    doc["run"] = {{"kind", "scan-e0"}, {"values", {0.02, 0.05}}, {"solvers", {"rdwa", "krylov"}}};
    const fs::path dir = scratch("scan");
    const RunReport r = run_scenario(parse_scenario(doc), dir.string());
    REQUIRE(r.converged);
    const std::string csv = slurp(dir / "scan.csv");
    CHECK(csv.rfind("E0,solver,converged,iterations,residual,epsilon,P_diss\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    fs::remove_all(dir);
}

TEST_CASE("real-part frame converges wherever the direct frame does") {
    json doc = read_json("shipped_scan_e0.json");
    doc["run"]["values"] = {0.01, 0.03, 0.05};
    std::vector<bool> direct, real;
    for (const char* mode : {"direct", "real"}) {
        doc["representation"]["mode"] = mode;
        const ScenarioConfig cfg = parse_scenario(doc);
        for (const ScanPoint& pt : run_scan(cfg, prepare_model(cfg)))
            (std::string(mode) == "direct" ? direct : real).push_back(pt.converged);
    }
    REQUIRE(direct.size() == real.size());
    CHECK(direct.front());
    for (size_t k = 0; k < direct.size(); ++k)
        if (direct[k]) CHECK(real[k]);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    CHECK(run_cli("run " CATM_SCENARIO_DIR "/rabi.json --out " + (dir / "ok").string() + " --seed-check") == 0);
    CHECK(fs::exists(dir / "ok" / "summary.json"));

    json bad = read_json("rabi.json");
    bad["pulse"]["tau"] = -1.0;
    std::ofstream((dir / "bad.json").string()) << bad.dump();
    CHECK(run_cli("run " + (dir / "bad.json").string() + " --out " + (dir / "bad").string()) == 1);
    CHECK(run_cli("run " + (dir / "absent.json").string()) == 1);
    CHECK(run_cli("frobnicate") == 1);

    json stuck = three_level("direct");
    stuck["solver"] = {{"method", "rdwa"}, {"max_iterations", 2}};
    std::ofstream((dir / "stuck.json").string()) << stuck.dump();
    CHECK(run_cli("run " + (dir / "stuck.json").string() + " --out " + (dir / "stuck").string()) == 2);
    CHECK(fs::exists(dir / "stuck" / "summary.json"));
    fs::remove_all(dir);
}
