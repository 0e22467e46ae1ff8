#include "catm/observables.hpp"

#include <cmath>

#include "catm/error.hpp"

namespace catm {

namespace {

const cplx I(0.0, 1.0);

}  // namespace

WavefunctionSeries reconstruct_wavefunction(const FloquetSolution& sol, const FloquetOperator& op) {
    const TimeGrid& grid = op.grid();
    const ExtendedVector samples = op.transform().to_dvr(sol.fbr);
    const int count = grid.physical_points();
    WavefunctionSeries out;
    out.states.resize(op.n_states(), count);
    for (int k = 0; k < count; ++k) {
        const double t = grid.point(k);
        out.times.push_back(t);
        const Eigen::VectorXcd tilde = sol.scale * std::exp(-I * sol.refined_eigenvalue * t) *
                                       samples.col(k);
        out.states.col(k) = back_transform(tilde, t, op.system().energies, op.representation().mode);
    }
    return out;
}

Eigen::VectorXcd wavefunction_at(const FloquetSolution& sol, const FloquetOperator& op, double t) {
    const Eigen::VectorXcd u = interpolate_fbr(op.grid(), sol.fbr, t);
    const Eigen::VectorXcd tilde = sol.scale * std::exp(-I * sol.refined_eigenvalue * t) * u;
    return back_transform(tilde, t, op.system().energies, op.representation().mode);
}

double residue_epsilon(const Eigen::VectorXcd& psi0, int intended_index) {
    if (intended_index < 0 || intended_index >= psi0.size())
        throw Error("wave-operator-solver", "intended index out of range");
    const cplx a = psi0[intended_index];
    if (a == 0.0) throw Error("wave-operator-solver", "intended component is zero");
    double eps = 0.0;
    for (Eigen::Index j = 0; j < psi0.size(); ++j)
        if (j != intended_index) eps = std::max(eps, std::norm(psi0[j] / a));
    return eps;
}

double initial_deviation(const Eigen::VectorXcd& psi0, const Eigen::VectorXcd& target) {
    if (psi0.size() != target.size()) throw Error("wave-operator-solver", "length mismatch");
    const int l = dominant_component(target);
    const Eigen::VectorXcd scaled = psi0 * (target[l] / psi0[l]);
    double eps = 0.0;
    for (Eigen::Index j = 0; j < psi0.size(); ++j)
        if (j != l) eps = std::max(eps, std::norm(scaled[j] - target[j]));
    return eps;
}

ProbabilitySeries transition_probabilities(const WavefunctionSeries& series,
                                           const std::vector<int>& bound_states,
                                           const std::optional<Eigen::MatrixXcd>& metric) {
    ProbabilitySeries p;
    p.times = series.times;
    p.populations = series.states.cwiseAbs2();
    for (Eigen::Index k = 0; k < series.states.cols(); ++k) {
        double bound = 0.0;
        for (int j : bound_states) bound += p.populations(j, k);
        p.dissociation.push_back(1.0 - bound);
        if (metric) {
            const Eigen::VectorXcd c = series.states.col(k);
            p.norm.push_back(std::real((c.adjoint() * (*metric) * c)(0, 0)));
        } else {
            p.norm.push_back(p.populations.col(k).sum());
        }
    }
    return p;
}

}  // namespace catm
