#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "catm/floquet_operator.hpp"
#include "catm/wave_operator.hpp"

namespace catm {

// Molecular state vectors (columns) at increasing times.
struct WavefunctionSeries {
    std::vector<double> times;
    Eigen::MatrixXcd states;
};

// Psi(t_i) = c exp(-i E t_i) lambda(t_i) on the DVR points of [0, T0], back-transformed to the
// molecular eigenbasis. The refined eigenvalue is used. Times are local to the operator grid.
WavefunctionSeries reconstruct_wavefunction(const FloquetSolution& sol, const FloquetOperator& op);

// Same at an arbitrary local time, by band-limited interpolation.
Eigen::VectorXcd wavefunction_at(const FloquetSolution& sol, const FloquetOperator& op, double t);

// Largest |<j|Psi(0)>|^2 over j != i after scaling the i component to one.
double residue_epsilon(const Eigen::VectorXcd& psi0, int intended_index);

// Largest |Psi(0)_j - target_j|^2 over j != pivot, for superposition targets.
double initial_deviation(const Eigen::VectorXcd& psi0, const Eigen::VectorXcd& target);

struct ProbabilitySeries {
    std::vector<double> times;
    Eigen::MatrixXd populations;  // n_states x K, |c_j|^2
    std::vector<double> dissociation;
    std::vector<double> norm;

    int n_states() const { return static_cast<int>(populations.rows()); }
    size_t size() const { return times.size(); }
};

// P_j = |c_j|^2 and P_diss = 1 - sum over bound states. The norm uses the metric
// G = R^H R w when provided, otherwise sum_j |c_j|^2.
ProbabilitySeries transition_probabilities(const WavefunctionSeries& series,
                                           const std::vector<int>& bound_states,
                                           const std::optional<Eigen::MatrixXcd>& metric = {});

}  // namespace catm
