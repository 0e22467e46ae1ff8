#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include "catm/error.hpp"
#include "catm/scenario.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kNotConverged = 2, kSeedMismatch = 3, kOther = 4 };

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Files whose bytes differ between the two runs; wall-clock summaries are skipped.
std::vector<std::string> differing_outputs(const catm::RunReport& a, const std::filesystem::path& da,
                                           const std::filesystem::path& db) {
    std::vector<std::string> out;
    for (const auto& f : a.files) {
        if (std::filesystem::path(f).extension() != ".csv") continue;
        if (!std::filesystem::exists(db / f) || slurp(da / f) != slurp(db / f)) out.push_back(f);
    }
    return out;
}

int run(const std::string& config, const std::string& out_dir, bool seed_check) {
    const catm::ScenarioConfig cfg = catm::load_scenario(config);
    const std::string dir = out_dir.empty() ? cfg.output_directory : out_dir;
    const catm::RunReport report = catm::run_scenario(cfg, dir);
    std::cout << cfg.name << ": " << catm::run_kind_name(cfg.run) << " -> " << dir << "\n";
    if (report.summary.contains("final"))
        std::cout << "  final P_diss = " << report.summary["final"]["P_diss"].get<double>() << "\n";
    if (report.summary.contains("epsilon"))
        std::cout << "  epsilon = " << report.summary["epsilon"].get<double>() << "\n";
    if (!report.converged) {
        std::cerr << "not converged: " << report.summary.value("error", std::string("unknown")) << "\n";
        return kNotConverged;
    }
    if (seed_check) {
        const std::filesystem::path again = std::filesystem::path(dir) / ".seed-check";
        const catm::RunReport second = catm::run_scenario(cfg, again.string());
        const auto diff = differing_outputs(report, dir, again);
        std::filesystem::remove_all(again);
        if (!second.converged || !diff.empty()) {
            for (const auto& f : diff) std::cerr << "seed check: " << f << " differs between runs\n";
            return kSeedMismatch;
        }
        std::cout << "  seed check: outputs identical\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained adiabatic trajectory method driver"};
    app.require_subcommand(1);
    std::string config, out_dir;
    bool seed_check = false;
    CLI::App* cmd = app.add_subcommand("run", "Run the scenario described by a JSON config");
    cmd->add_option("config", config, "Scenario config file")->required();
    cmd->add_option("--out", out_dir, "Output directory (overrides output.directory)");
    cmd->add_flag("--seed-check", seed_check, "Run twice and require byte-identical CSV outputs");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    try {
        return run(config, out_dir, seed_check);
    } catch (const catm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const catm::ConvergenceError& e) {
        std::cerr << "not converged: " << e.what() << "\n";
        return kNotConverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
}
