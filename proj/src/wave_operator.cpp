#include <algorithm>
#include "catm/wave_operator.hpp"

#include <cmath>
#include <sstream>

#include "catm/error.hpp"

namespace catm {

namespace {

const char* kModule = "wave-operator-solver";

cplx inner(const ExtendedVector& a, const ExtendedVector& b) {
    return (a.conjugate().cwiseProduct(b)).sum();
}

void check_divergence(const std::vector<double>& h, const SolverSettings& s) {
    const size_t k = h.size() - 1;
    if (!std::isfinite(h[k]))
        throw ConvergenceError(kModule, "non-finite residual at iteration " + std::to_string(k + 1), h);
    if (k >= static_cast<size_t>(s.growth_window) && h[k] > s.growth_factor * h[k - s.growth_window])
        throw ConvergenceError(kModule, "residual diverging at iteration " + std::to_string(k + 1), h);
    const size_t w = static_cast<size_t>(s.stagnation_window);
    if (k >= w && *std::min_element(h.begin() + (k - w + 1), h.end()) >
                      s.stagnation_factor * *std::min_element(h.begin(), h.begin() + (k - w + 1)))
        throw ConvergenceError(kModule, "residual stagnating at iteration " + std::to_string(k + 1), h);
}

}  // namespace

ActiveProjector ActiveProjector::from_initial_state(const Eigen::VectorXcd& initial_state) {
    return ActiveProjector{dominant_component(initial_state)};
}

void SolverSettings::validate() const {
    if (!(tolerance > 0.0)) throw ConfigError(kModule, "solver.tolerance", "must be positive");
    if (max_iterations < 1) throw ConfigError(kModule, "solver.max_iterations", "must be positive");
    if (k_max < 2) throw ConfigError(kModule, "solver.k_max", "must be at least 2");
    if (stagnation_window < 1 || growth_window < 1)
        throw ConfigError(kModule, "solver", "detector windows must be positive");
}

ExtendedVector build_trial(const Eigen::VectorXcd& initial_state, const TimeGrid& grid) {
    if (initial_state.size() == 0 || initial_state.cwiseAbs().maxCoeff() == 0.0)
        throw ConfigError(kModule, "initial_state", "initial state is zero");
    return initial_state.replicate(1, grid.n_modes);
}

RdwaIteration::RdwaIteration(const FloquetOperator& op, ActiveProjector proj, SolverSettings settings)
    : op_(op), proj_(proj), settings_(settings) {
    diagonal_ = op_.fbr_diagonal();
    row_ = op_.fbr_row(proj_.state);
}

RdwaState RdwaIteration::initial_state(const ExtendedVector& trial_dvr) const {
    RdwaState s;
    const ExtendedVector f = op_.transform().to_fbr(trial_dvr);
    const cplx a = f(proj_.state, 0);
    if (std::abs(a) == 0.0) throw Error(kModule, "trial vector has no component on the active vector");
    s.x = f / a;
    s.x(proj_.state, 0) = 0.0;
    return s;
}

ExtendedVector RdwaIteration::column(const RdwaState& state) const {
    ExtendedVector w = state.x;
    w(proj_.state, 0) = 1.0;
    return w;
}

ExtendedVector RdwaIteration::correction(const ExtendedVector& omega, const ExtendedVector& residual,
                                         cplx energy) {
    const int l = proj_.state;
    ExtendedVector distortion;
    if (settings_.freeze_distortion && have_frozen_) {
        distortion = frozen_;
    } else {
        distortion = diagonal_ - omega.cwiseProduct(row_);
        if (settings_.freeze_distortion) {
            frozen_ = distortion;
            have_frozen_ = true;
        }
    }
    ExtendedVector dx(omega.rows(), omega.cols());
    for (Eigen::Index m = 0; m < omega.cols(); ++m) {
        for (Eigen::Index j = 0; j < omega.rows(); ++j) {
            if (j == l && m == 0) {
                dx(j, m) = 0.0;
                continue;
            }
            const cplx den = energy - distortion(j, m);
            if (std::abs(den) < settings_.denominator_floor) {
                std::ostringstream msg;
                msg << "near-degenerate denominator at basis index (state " << j << ", mode "
                    << op_.grid().mode_at(static_cast<int>(m)) << ")";
                throw ConvergenceError(kModule, msg.str(), {});
            }
            dx(j, m) = residual(j, m) / den;
        }
    }
    return dx;
}

double RdwaIteration::step(RdwaState& state) {
    const ExtendedVector omega = column(state);
    image_ = op_.apply_fbr(omega);
    const cplx heff = image_(proj_.state, 0);
    const ExtendedVector r = image_ - heff * omega;
    const double res = r.norm() / omega.norm();
    state.effective_energy = heff;
    state.residuals.push_back(res);
    ++state.iterations;
    if (res < settings_.tolerance || !std::isfinite(res)) return res;
    state.x += correction(omega, r, heff);
    return res;
}

double eigen_residual(const FloquetOperator& op, const ExtendedVector& fbr, cplx energy) {
    const ExtendedVector w = op.apply_fbr(fbr);
    return (w - energy * fbr).norm() / fbr.norm();
}

FloquetSolution solve_constrained_floquet(const FloquetOperator& op,
                                          const Eigen::VectorXcd& initial_state,
                                          const SolverSettings& settings, const IterationLog& log) {
    settings.validate();
    if (initial_state.size() != op.n_states())
        throw ConfigError(kModule, "initial_state", "length differs from the basis size");
    if (std::abs(initial_state.norm() - 1.0) > 1e-10)
        throw ConfigError(kModule, "initial_state", "must be normalized");
    const ActiveProjector proj = ActiveProjector::from_initial_state(initial_state);
    if (op.absorber() && op.absorber()->pivot() != proj.state)
        throw Error(kModule, "operator absorber was built from a different initial state");

    const long passes_before = op.transform_passes();
    RdwaIteration rdwa(op, proj, settings);
    const ExtendedVector trial = build_trial(initial_state, op.grid());
    const int l = proj.state;

    ExtendedVector omega, image;
    cplx energy;
    std::vector<double> history;
    bool converged = false;
    int iterations = 0;

    try {
        if (!settings.use_krylov) {
            RdwaState st = rdwa.initial_state(trial);
            for (int k = 0; k < settings.max_iterations; ++k) {
                const double res = rdwa.step(st);
                history = st.residuals;
                iterations = st.iterations;
                if (log) log({st.iterations, res, st.effective_energy});
                if (res < settings.tolerance) {
                    converged = true;
                    break;
                }
                check_divergence(history, settings);
            }
            omega = rdwa.column(st);
            image = rdwa.last_image();
            energy = st.effective_energy;
        } else {
            KrylovBasis basis(op);
            const ExtendedVector start = rdwa.column(rdwa.initial_state(trial));
            basis.extend(start);
            for (int k = 0; k < settings.max_iterations; ++k) {
                const KrylovBasis::Candidate c = basis.select(initial_state);
                const cplx a = c.vector(l, 0);
                if (std::abs(a) == 0.0)
                    throw ConvergenceError(kModule, "selected vector has no active component", history);
                omega = c.vector / a;
                image = c.image / a;
                energy = c.energy;
                ExtendedVector r = image - energy * omega;
                double res = r.norm() / omega.norm();
                if (res < settings.tolerance) {
                    image = op.apply_fbr(omega);
                    r = image - energy * omega;
                    res = r.norm() / omega.norm();
                }
                history.push_back(res);
                iterations = k + 1;
                if (log) log({iterations, res, energy});
                if (res < settings.tolerance) {
                    converged = true;
                    break;
                }
                check_divergence(history, settings);
                const ExtendedVector dx = rdwa.correction(omega, r, energy);
                if (basis.size() >= settings.k_max) {
                    basis.clear();
                    basis.extend(omega);
                }
                if (!basis.extend(dx) && !basis.extend(r))
                    throw ConvergenceError(kModule, "Krylov subspace stalled on linear dependence",
                                           history);
            }
        }
    } catch (const ConvergenceError& e) {
        if (!e.history().empty()) throw;
        throw ConvergenceError(kModule, std::string(e.what()).substr(std::string(kModule).size() + 2),
                               history);
    }
    if (!converged)
        throw ConvergenceError(kModule,
                               "no convergence after " + std::to_string(iterations) + " iterations",
                               history);

    FloquetSolution sol;
    sol.converged = true;
    sol.eigenvalue = energy;
    sol.fbr = omega;
    sol.alpha_component = omega(l, 0);
    sol.pivot = l;
    sol.iterations = iterations;
    sol.history = history;
    sol.initial_state = initial_state;
    const double wn = omega.norm();
    sol.residual = (image - energy * omega).norm() / wn;
    sol.refined_eigenvalue = inner(omega, image) / inner(omega, omega);
    sol.refined_residual = (image - sol.refined_eigenvalue * omega).norm() / wn;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(op.grid().n_modes));
    const cplx u0 = omega.row(l).sum() * inv_sqrt_n;
    sol.scale = initial_state[l] / u0;
    sol.transform_passes = op.transform_passes() - passes_before;
    return sol;
}

}  // namespace catm
