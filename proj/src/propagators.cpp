#include "catm/propagators.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <sstream>

#include "catm/error.hpp"
#include "catm/fft.hpp"

namespace catm {

namespace {

const cplx I(0.0, 1.0);
const char* kModule = "reference-propagators";

bool hermitian(const Eigen::MatrixXcd& h) {
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    return (h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

double spectral_radius(const Eigen::MatrixXcd& h) {
    if (hermitian(h)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool should_record(const StepConfig& cfg, int step) {
    return step == cfg.n_steps || (cfg.record_every > 0 && step % cfg.record_every == 0);
}

void append(WavefunctionSeries& s, double t, const Eigen::VectorXcd& psi) {
    s.times.push_back(t);
    s.states.conservativeResize(psi.size(), s.states.cols() + 1);
    s.states.col(s.states.cols() - 1) = psi;
}

Eigen::MatrixXcd magnus_generator(const HamiltonianProvider& h, double a, double dt, MagnusOrder order) {
    if (order == MagnusOrder::midpoint) return -I * dt * h(a + 0.5 * dt);
    const double off = std::sqrt(3.0) / 6.0;
    const Eigen::MatrixXcd h1 = h(a + (0.5 - off) * dt);
    const Eigen::MatrixXcd h2 = h(a + (0.5 + off) * dt);
    const Eigen::MatrixXcd comm = h2 * h1 - h1 * h2;
    return -I * (0.5 * dt) * (h1 + h2) - (std::sqrt(3.0) / 12.0) * dt * dt * comm;
}

WavefunctionSeries run_oracle(const HamiltonianProvider& h, const Eigen::VectorXcd& psi0,
                              const std::vector<double>& times, long per_unit_substeps,
                              const OracleConfig& cfg, double unit) {
    WavefunctionSeries out;
    out.times = times;
    out.states.resize(psi0.size(), static_cast<Eigen::Index>(times.size()));
    Eigen::VectorXcd psi = psi0;
    out.states.col(0) = psi;
    for (size_t i = 1; i < times.size(); ++i) {
        const double a = times[i - 1];
        const double len = times[i] - a;
        const long m = std::max<long>(1, static_cast<long>(std::ceil(len / unit * per_unit_substeps - 1e-9)));
        const double dt = len / m;
        for (long s = 0; s < m; ++s) {
            const Eigen::MatrixXcd g = magnus_generator(h, a + s * dt, dt, cfg.order);
            psi = g.exp() * psi;
        }
        out.states.col(static_cast<Eigen::Index>(i)) = psi;
    }
    return out;
}

}  // namespace

HamiltonianProvider level_hamiltonian(const LevelSystem& system, const PulseSpec& pulse) {
    return [system, pulse](double t) { return molecular_hamiltonian(system, pulse, t); };
}

void StepConfig::validate() const {
    if (n_steps < 1) throw ConfigError(kModule, "run.n_steps", "must be positive");
    if (!(duration > 0.0)) throw ConfigError(kModule, "time_grid.T0", "duration must be positive");
    if (record_every < 0) throw ConfigError(kModule, "run.record_every", "must be nonnegative");
}

PropagationResult sod_propagate(const HamiltonianProvider& h, const Eigen::VectorXcd& psi0,
                                const StepConfig& cfg) {
    cfg.validate();
    PropagationResult res;
    const double dt = cfg.step();
    double emax = 0.0;
    bool herm = true;
    for (int s = 0; s <= 4; ++s) {
        const Eigen::MatrixXcd hs = h(cfg.duration * s / 4.0);
        herm = herm && hermitian(hs);
        emax = std::max(emax, spectral_radius(hs));
    }
    if (!herm) res.warnings.push_back("non-Hermitian Hamiltonian: second-order differencing is not norm-stable with absorbing potentials");
    if (dt * emax >= 1.0) {
        std::ostringstream msg;
        msg << "stability bound violated: dt*E_max = " << dt * emax
            << " >= 1, expect exponential blow-up of the three-point recursion";
        res.warnings.push_back(msg.str());
    }
    Eigen::VectorXcd prev = psi0;
    append(res.series, 0.0, prev);
    Eigen::VectorXcd cur = (-I * dt * h(0.5 * dt)).exp() * psi0;
    if (should_record(cfg, 1)) append(res.series, dt, cur);
    for (int k = 1; k < cfg.n_steps; ++k) {
        const double t = k * dt;
        Eigen::VectorXcd next = prev - 2.0 * I * dt * (h(t) * cur);
        prev = std::move(cur);
        cur = std::move(next);
        if (should_record(cfg, k + 1)) append(res.series, (k + 1) * dt, cur);
    }
    return res;
}

PropagationResult split_operator_propagate(const SpatialGrid& grid, const SurfaceModel& model,
                                           const PulseSpec& pulse, const Eigen::VectorXcd& psi0,
                                           const StepConfig& cfg) {
    cfg.validate();
    grid.validate();
    const int n = grid.n_points;
    if (psi0.size() != 2 * n) throw Error(kModule, "initial grid state must have 2 n_points entries");
    const double dt = cfg.step();
    const Eigen::VectorXd k = grid.wavenumbers();
    Eigen::VectorXcd kin_half(n), pot_half_g(n), pot_half_e(n);
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) {
        const double ek = std::isfinite(model.mass) ? k[i] * k[i] / (2.0 * model.mass) : 0.0;
        kin_half[i] = std::exp(-I * ek * (0.5 * dt)) / static_cast<double>(n);
        const double x = grid.x(i);
        const cplx cap = model.cap_enabled ? model.cap.value(x) : cplx(0.0);
        pot_half_g[i] = std::exp(-I * (model.ground_potential(x) + cap) * (0.5 * dt));
        pot_half_e[i] = std::exp(-I * (model.excited_potential(x) + cap) * (0.5 * dt));
        mu[i] = model.dipole_function(x);
    }
    const bool free_kinetic = std::isfinite(model.mass);
    StridedFft fft(n, 1);
    Eigen::VectorXcd g = psi0.head(n), e = psi0.tail(n), buf(n);
    auto kinetic = [&](Eigen::VectorXcd& v) {
        if (!free_kinetic) return;
        fft.forward(v.data(), buf.data());
        buf = buf.cwiseProduct(kin_half);
        fft.backward(buf.data(), v.data());
    };
    PropagationResult res;
    Eigen::VectorXcd full(2 * n);
    full << g, e;
    append(res.series, 0.0, full);
    for (int s = 0; s < cfg.n_steps; ++s) {
        const double field = evaluate_pulse(pulse, (s + 0.5) * dt);
        kinetic(g);
        kinetic(e);
        g = g.cwiseProduct(pot_half_g);
        e = e.cwiseProduct(pot_half_e);
        for (int i = 0; i < n; ++i) {
            const double w = mu[i] * field * dt;
            const double c = std::cos(w), sn = std::sin(w);
            const cplx gi = g[i], ei = e[i];
            g[i] = c * gi - I * sn * ei;
            e[i] = -I * sn * gi + c * ei;
        }
        g = g.cwiseProduct(pot_half_g);
        e = e.cwiseProduct(pot_half_e);
        kinetic(g);
        kinetic(e);
        if (should_record(cfg, s + 1)) {
            full << g, e;
            append(res.series, (s + 1) * dt, full);
        }
    }
    return res;
}

OracleResult dense_expm_oracle(const HamiltonianProvider& h, const Eigen::VectorXcd& psi0,
                               const std::vector<double>& times, const OracleConfig& cfg) {
    if (psi0.size() > cfg.max_dimension)
        throw Error(kModule, "oracle dimension " + std::to_string(psi0.size()) + " exceeds the cap " +
                                 std::to_string(cfg.max_dimension));
    if (times.size() < 2 || times.front() != 0.0)
        throw Error(kModule, "oracle output times must start at 0 and contain an end point");
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw Error(kModule, "oracle output times must increase");
    const double unit = 1.0;
    long per_unit = std::max<long>(1, static_cast<long>(std::ceil(unit / cfg.initial_substep)));
    OracleResult best;
    best.series = run_oracle(h, psi0, times, per_unit, cfg, unit);
    for (int d = 0; d < cfg.max_doublings; ++d) {
        per_unit *= 2;
        WavefunctionSeries next = run_oracle(h, psi0, times, per_unit, cfg, unit);
        const Eigen::VectorXd p0 = best.series.states.col(best.series.states.cols() - 1).cwiseAbs2();
        const Eigen::VectorXd p1 = next.states.col(next.states.cols() - 1).cwiseAbs2();
        const double change = (p1 - p0).cwiseAbs().maxCoeff();
        best.series = std::move(next);
        best.substeps_per_unit_time = per_unit;
        best.change = change;
        if (change < cfg.tolerance) return best;
    }
    throw ConvergenceError(kModule, "oracle did not reach the substep tolerance", {best.change});
}

double chebyshev_energy_span(double max_energy, int n_modes, double total_time) {
    return max_energy + n_modes * 2.0 * M_PI / total_time;
}

long chebyshev_iteration_bound(double energy_span, double total_time) {
    if (!(energy_span > 0.0) || !(total_time > 0.0))
        throw Error(kModule, "energy span and time must be positive");
    return static_cast<long>(std::ceil(energy_span * total_time / 2.0 - 1e-12));
}

WavefunctionSeries project_to_basis(const ComplexEigenbasis& basis, const WavefunctionSeries& grid_series) {
    WavefunctionSeries out;
    out.times = grid_series.times;
    out.states = basis.left_vectors.transpose() * grid_series.states * basis.weight;
    return out;
}

}  // namespace catm
