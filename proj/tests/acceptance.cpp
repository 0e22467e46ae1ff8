#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "catm/error.hpp"
#include "catm/propagators.hpp"
#include "catm/scenario.hpp"
#include "oracles.hpp"

using namespace catm;

namespace {

constexpr double kRabiTolerance = 1e-8;
constexpr double kRabiSeconds = 5.0;
constexpr double kDenseOracleTolerance = 1e-8;
constexpr double kDenseOracleSeconds = 30.0;
constexpr double kMatrixFreeTolerance = 1e-10;
constexpr double kResidualBound = 1e-12;
constexpr double kEpsilonBound = 1e-10;
constexpr double kEpsilonV0 = 0.4;
constexpr double kScanV0Seconds = 120.0;
constexpr double kSlopeTarget = 2.0;
constexpr double kSlopeTolerance = 0.2;
constexpr double kSlopeSeconds = 60.0;
constexpr double kModeTolerance = 1e-5;
constexpr double kModeSeconds = 120.0;
constexpr double kMultistepTolerance = 1e-3;
constexpr double kMultistepSeconds = 180.0;
constexpr double kChebyshevReference = 21084.0;
constexpr double kChebyshevTolerance = 0.01;
constexpr double kOverlapBound = 1.0 - 1e-8;
constexpr double kScanE0Seconds = 300.0;

struct Verdict {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string scenario_path(const std::string& name) { return std::string(CATM_SCENARIO_DIR) + "/" + name; }

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Explicit residuals of every converged solve, collected for the convergence criterion.
struct ResidualLog {
    std::vector<std::pair<std::string, double>> entries;
    void add(const std::string& what, double r) { entries.emplace_back(what, r); }
};

ResidualLog g_residuals;

Eigen::VectorXcd initial_of(const ScenarioConfig& cfg, int n) {
    return cfg.initial_index ? Eigen::VectorXcd(Eigen::VectorXcd::Unit(n, *cfg.initial_index)) : cfg.initial_state;
}

FloquetOperator operator_for(const ScenarioConfig& cfg, const PreparedModel& model) {
    const Eigen::VectorXcd psi0 = initial_of(cfg, model.system.n_states());
    return FloquetOperator(model.system, cfg.pulse, cfg.time_grid, cfg.representation, AbsorberSetup{cfg.absorber, psi0});
}

double final_dissociation(const PreparedModel& model, const WavefunctionSeries& series) {
    return transition_probabilities(series, model.bound_states, model.metric).dissociation.back();
}

double max_relative_spread(const std::vector<double>& v) {
    const double ref = v.front();
    double spread = 0.0;
    for (double x : v) spread = std::max(spread, std::abs(x - ref) / std::abs(ref));
    return spread;
}

Verdict rabi() {
    ScenarioConfig cfg = load_scenario(scenario_path("rabi.json"));
    const PreparedModel model = prepare_model(cfg);
    const auto start = std::chrono::steady_clock::now();
    const FloquetOperator op = operator_for(cfg, model);
    const FloquetSolution sol = solve_constrained_floquet(op, initial_of(cfg, 2), cfg.solver);
    const WavefunctionSeries series = reconstruct_wavefunction(sol, op);
    const double seconds = seconds_since(start);
    g_residuals.add("rabi", eigen_residual(op, sol.fbr, sol.refined_eigenvalue));
    const double mu = std::abs(cfg.levels.dipole(0, 1));
    double err = 0.0;
    for (size_t c = 0; c < series.times.size(); ++c) {
        const double s = std::sin(mu * envelope_area(cfg.pulse, series.times[c]));
        err = std::max(err, std::abs(std::norm(series.states(1, static_cast<Eigen::Index>(c))) - s * s));
    }
    const bool ok = err < kRabiTolerance && seconds < kRabiSeconds;
    return {ok, fmt("max |P1 - sin^2| = %.2e", err) + " over " + std::to_string(series.times.size()) + " DVR points",
            seconds};
}

LevelSystem random_six_level() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    LevelSystem s;
    s.energies.resize(6);
    for (int j = 0; j < 6; ++j) s.energies[j] = 0.15 * j + 0.05 * u(rng);
    s.dipole = Eigen::MatrixXcd::Zero(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) {
            const cplx c(g(rng), g(rng));
            s.dipole(i, j) = c;
            s.dipole(j, i) = std::conj(c);
        }
    return s;
}

Verdict dense_oracle() {
    const LevelSystem sys = random_six_level();
    const double t0 = 60.0;
    PulseSpec p;
    p.peak_amplitude = 0.1;
    p.carrier_frequency = 0.16;
    p.center = 0.5 * t0;
    p.width = 0.1 * t0;
    p.duration = t0;
    const Eigen::VectorXcd psi0 = Eigen::VectorXcd::Unit(6, 0);
    const auto start = std::chrono::steady_clock::now();
    const FloquetOperator op(sys, p, TimeGrid{512, t0, 60.0}, RepresentationConfig{Representation::direct, 0.5},
                             AbsorberSetup{AbsorberEnvelope{0.8}, psi0});
    SolverSettings settings;
    settings.use_krylov = true;
    const FloquetSolution sol = solve_constrained_floquet(op, psi0, settings);
    const Eigen::VectorXcd psi_t = wavefunction_at(sol, op, t0);
    const OracleResult ref = dense_expm_oracle(level_hamiltonian(sys, p), psi0, {0.0, t0});
    const double seconds = seconds_since(start);
    g_residuals.add("six-level", eigen_residual(op, sol.fbr, sol.refined_eigenvalue));
    double err = 0.0;
    for (int j = 0; j < 6; ++j) err = std::max(err, std::abs(std::norm(psi_t[j]) - std::norm(ref.series.states(j, 1))));
    const double moved = 1.0 - std::norm(ref.series.states(0, 1));
    const bool ok = err < kDenseOracleTolerance && seconds < kDenseOracleSeconds;
    return {ok, fmt("max |dP| = %.2e", err) + fmt(", transferred population %.3f", moved), seconds};
}

Verdict matrix_free() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    int cases = 0;
    for (int n = 1; n <= 4; ++n)
        for (int N : {2, 4, 8, 16})
            for (Representation mode : {Representation::direct, Representation::full, Representation::real_part}) {
                LevelSystem sys;
                sys.energies.resize(n);
                for (int j = 0; j < n; ++j) sys.energies[j] = cplx(u(rng), -0.05 * u(rng));
                const Eigen::MatrixXcd m = oracle::random_matrix(rng, n, n);
                sys.dipole = 0.5 * (m + m.transpose());
                sys.dipole.diagonal().setZero();
                PulseSpec p;
                p.peak_amplitude = 0.3;
                p.carrier_frequency = 0.7;
                p.center = 3.0;
                p.width = 0.9;
                p.duration = 6.0;
                Eigen::VectorXcd psi0 = oracle::random_matrix(rng, n, 1);
                psi0.normalize();
                const FloquetOperator op(sys, p, TimeGrid{N, 6.0, 2.5}, RepresentationConfig{mode, 0.5},
                                         AbsorberSetup{AbsorberEnvelope{0.4}, psi0});
                const Eigen::MatrixXcd dense = oracle::dense_floquet(op);
                const Eigen::MatrixXcd v = oracle::random_matrix(rng, n, N);
                const Eigen::VectorXcd ref = dense * oracle::flat(v);
                worst = std::max(worst, (oracle::flat(op.apply(v)) - ref).cwiseAbs().maxCoeff());
                ++cases;
            }
    return {worst < kMatrixFreeTolerance, fmt("max entry error %.2e", worst) + " over " + std::to_string(cases) + " cases",
            seconds_since(start)};
}

Verdict convergence_criterion() {
    double worst = 0.0;
    std::string where = "none";
    for (const auto& [what, r] : g_residuals.entries)
        if (!(r <= worst)) {
            worst = r;
            where = what;
        }
    const bool ok = !g_residuals.entries.empty() && worst < kResidualBound;
    return {ok,
            std::to_string(g_residuals.entries.size()) + " converged solves, worst " + fmt("%.2e", worst) + " (" + where + ")",
            0.0};
}

Verdict scan_v0() {
    const ScenarioConfig cfg = load_scenario(scenario_path("shipped_scan_v0.json"));
    const PreparedModel model = prepare_model(cfg);
    const auto start = std::chrono::steady_clock::now();
    const std::vector<ScanPoint> pts = run_scan(cfg, model);
    const double seconds = seconds_since(start);
    bool all = true, monotone = true;
    double at_target = std::numeric_limits<double>::quiet_NaN();
    std::string breaks;
    for (size_t i = 0; i < pts.size(); ++i) {
        if (!pts[i].converged) {
            all = false;
            continue;
        }
        ScenarioConfig c = cfg;
        c.absorber.amplitude = pts[i].value;
        g_residuals.add(fmt("V0=%.2f", pts[i].value), eigen_residual(operator_for(c, model), pts[i].eigenvector, pts[i].eigenvalue));
        if (std::abs(pts[i].value - kEpsilonV0) < 1e-12) at_target = pts[i].epsilon;
        if (i > 0 && pts[i - 1].converged && pts[i].epsilon > pts[i - 1].epsilon) {
            monotone = false;
            breaks += fmt(" %.2f", pts[i].value);
        }
    }
    std::string detail = fmt("eps(V0=0.4) = %.2e", at_target);
    detail += fmt(", eps(0.05) = %.2e", pts.front().epsilon) + fmt(", eps(0.5) = %.2e", pts.back().epsilon);
    detail += monotone ? ", monotone" : ", increases at V0 =" + breaks;
    if (!all) detail += ", unconverged points";
    const bool ok = all && at_target < kEpsilonBound && monotone && seconds < kScanV0Seconds;
    return {ok, detail, seconds};
}

// Least-squares slope of log(error) against log(dt).
double loglog_slope(const std::vector<double>& dt, const std::vector<double>& err) {
    const size_t n = dt.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double x = std::log(dt[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Verdict step_orders() {
    const double t0 = 40.0;
    LevelSystem sys{Eigen::VectorXcd(2), Eigen::MatrixXcd(2, 2)};
    sys.energies << 0.0, 0.3;
    sys.dipole << 0.0, 1.0, 1.0, 0.0;
    PulseSpec p;
    p.peak_amplitude = 0.2;
    p.carrier_frequency = 0.3;
    p.center = 0.5 * t0;
    p.width = 0.15 * t0;
    p.duration = t0;
    const Eigen::VectorXcd psi0 = Eigen::VectorXcd::Unit(2, 0);

    // The same two levels as a one-point grid with frozen nuclei for the split-operator propagator.
    const SpatialGrid grid{1, 0.0, 1.0};
    SurfaceModel surfaces;
    surfaces.ground_potential = [](double) { return 0.0; };
    surfaces.excited_potential = [](double) { return 0.3; };
    surfaces.dipole_function = [](double) { return 1.0; };
    surfaces.mass = std::numeric_limits<double>::infinity();
    surfaces.cap_enabled = false;

    const auto start = std::chrono::steady_clock::now();
    const OracleResult ref = dense_expm_oracle(level_hamiltonian(sys, p), psi0, {0.0, t0});
    const Eigen::VectorXcd exact = ref.series.states.col(1);
    std::vector<double> dts, sod_err, split_err;
    for (int steps : {400, 800, 1600, 3200}) {
        StepConfig sc;
        sc.n_steps = steps;
        sc.duration = t0;
        dts.push_back(sc.step());
        const PropagationResult a = sod_propagate(level_hamiltonian(sys, p), psi0, sc);
        sod_err.push_back((a.series.states.col(a.series.states.cols() - 1) - exact).norm());
        const PropagationResult b = split_operator_propagate(grid, surfaces, p, psi0 * std::sqrt(1.0 / grid.dx()), sc);
        split_err.push_back((b.series.states.col(b.series.states.cols() - 1) * std::sqrt(grid.dx()) - exact).norm());
    }
    const double seconds = seconds_since(start);
    const double s1 = loglog_slope(dts, sod_err), s2 = loglog_slope(dts, split_err);
    const bool ok = std::abs(s1 - kSlopeTarget) <= kSlopeTolerance && std::abs(s2 - kSlopeTarget) <= kSlopeTolerance &&
                    seconds < kSlopeSeconds;
    return {ok, fmt("SOD slope %.3f", s1) + fmt(", split-operator slope %.3f", s2), seconds};
}

Verdict modes() {
    ScenarioConfig cfg = load_scenario(scenario_path("shipped.json"));
    const PreparedModel model = prepare_model(cfg);
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> p;
    std::string detail;
    for (Representation mode : {Representation::direct, Representation::full, Representation::real_part}) {
        cfg.representation.mode = mode;
        const CatmRun run = run_catm(cfg, model);
        g_residuals.add(std::string("mode ") + representation_name(mode),
                        eigen_residual(operator_for(cfg, model), run.solution.fbr, run.solution.refined_eigenvalue));
        p.push_back(final_dissociation(model, run.series));
        detail += std::string(representation_name(mode)) + fmt(" %.10f, ", p.back());
    }
    const double seconds = seconds_since(start);
    const double spread = max_relative_spread(p);
    return {spread < kModeTolerance && seconds < kModeSeconds, "P_diss " + detail + fmt("relative spread %.2e", spread),
            seconds};
}

Verdict multistep() {
    ScenarioConfig cfg = load_scenario(scenario_path("shipped_multistep.json"));
    const PreparedModel model = prepare_model(cfg);
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> p;
    std::string detail;
    for (int k : {1, 2, 4}) {
        cfg.multistep.segments = k;
        const MultistepRun run = multistep_propagate(cfg, model);
        for (const auto& s : run.segments)
            g_residuals.add("k=" + std::to_string(k) + " segment " + std::to_string(s.index), s.residual);
        p.push_back(final_dissociation(model, run.series));
        detail += "k=" + std::to_string(k) + fmt(" %.8f, ", p.back());
    }
    const double seconds = seconds_since(start);
    const double spread = max_relative_spread(p);
    return {spread < kMultistepTolerance && seconds < kMultistepSeconds,
            "P_diss " + detail + fmt("relative spread %.2e", spread), seconds};
}

Verdict chebyshev() {
    const double total = 10000.0;
    const long n = chebyshev_iteration_bound(chebyshev_energy_span(2.934, 2048, total), total);
    const double rel = std::abs(n - kChebyshevReference) / kChebyshevReference;
    return {rel < kChebyshevTolerance, "N_Cheb = " + std::to_string(n) + fmt(", relative offset %.2e", rel), 0.0};
}

Verdict scan_e0() {
    const ScenarioConfig cfg = load_scenario(scenario_path("shipped_scan_e0.json"));
    const PreparedModel model = prepare_model(cfg);
    const auto start = std::chrono::steady_clock::now();
    const std::vector<ScanPoint> pts = run_scan(cfg, model);
    const double seconds = seconds_since(start);
    int rdwa = 0, krylov = 0, both = 0;
    bool inclusion = true;
    double worst = 2.0;
    for (size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].converged) {
            ScenarioConfig c = cfg;
            c.pulse.peak_amplitude = pts[i].value;
            g_residuals.add(pts[i].solver + fmt(" E0=%.2f", pts[i].value),
                            eigen_residual(operator_for(c, model), pts[i].eigenvector, pts[i].eigenvalue));
        }
        if (pts[i].solver != "rdwa") continue;
        const auto k = std::find_if(pts.begin(), pts.end(),
                                    [&](const ScanPoint& q) { return q.solver == "krylov" && q.value == pts[i].value; });
        if (k == pts.end()) continue;
        rdwa += pts[i].converged;
        krylov += k->converged;
        if (pts[i].converged && !k->converged) inclusion = false;
        if (pts[i].converged && k->converged) {
            ++both;
            worst = std::min(worst, eigenvector_overlap(pts[i].eigenvector, k->eigenvector));
        }
    }
    const bool ok = inclusion && both > 0 && worst > kOverlapBound && seconds < kScanE0Seconds;
    std::string detail = "RDWA converged " + std::to_string(rdwa) + ", Krylov " + std::to_string(krylov) + ", both " +
                         std::to_string(both) + fmt(", min overlap 1 - %.1e", std::max(0.0, 1.0 - worst));
    detail += inclusion ? ", Krylov domain contains RDWA domain" : ", RDWA converged where Krylov did not";
    return {ok, detail, seconds};
}

Verdict guarded(const std::function<Verdict()>& f) {
    const auto start = std::chrono::steady_clock::now();
    try {
        Verdict v = f();
        if (v.seconds == 0.0) v.seconds = seconds_since(start);
        return v;
    } catch (const std::exception& e) {
        return {false, std::string("exception: ") + e.what(), seconds_since(start)};
    }
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> order = {
        {1, "two-level Rabi oracle", rabi},
        {2, "six-level dense oracle", dense_oracle},
        {3, "matrix-free operator", matrix_free},
        {5, "initial-condition residue over V0", scan_v0},
        {6, "SOD and split-operator order", step_orders},
        {7, "interaction-mode equivalence", modes},
        {8, "multistep consistency", multistep},
        {9, "Chebyshev iteration bound", chebyshev},
        {10, "RDWA and Krylov agreement over E0", scan_e0},
        {4, "explicit eigen residual of converged solves", convergence_criterion},
    };
    std::vector<std::pair<const Criterion*, Verdict>> results;
    for (const auto& c : order) {
        std::fprintf(stderr, "running criterion %d\n", c.id);
        results.emplace_back(&c, guarded(c.run));
    }
    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first->id < b.first->id; });
    int failed = 0;
    for (const auto& [c, v] : results) {
        std::printf("criterion %2d %s  %s: %s (%.1f s)\n", c->id, v.pass ? "PASS" : "FAIL", c->title, v.detail.c_str(),
                    v.seconds);
        failed += !v.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
    return failed == 0 ? 0 : 1;
}
