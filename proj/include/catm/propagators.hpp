#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "catm/floquet_operator.hpp"
#include "catm/observables.hpp"
#include "catm/pulse.hpp"
#include "catm/spatial_model.hpp"

namespace catm {

// Molecular Hamiltonian matrix at time t.
using HamiltonianProvider = std::function<Eigen::MatrixXcd(double)>;

HamiltonianProvider level_hamiltonian(const LevelSystem& system, const PulseSpec& pulse);

struct StepConfig {
    int n_steps = 1000;
    double duration = 0.0;  // T0; dt = duration / n_steps
    int record_every = 0;   // 0 records only the initial and final states

    double step() const { return duration / n_steps; }
    void validate() const;
};

struct PropagationResult {
    WavefunctionSeries series;
    std::vector<std::string> warnings;
};

// Three-point recursion psi(t + dt) = psi(t - dt) - 2 i dt H(t) psi(t), seeded by one exact step.
PropagationResult sod_propagate(const HamiltonianProvider& h, const Eigen::VectorXcd& psi0,
                                const StepConfig& cfg);

// Strang splitting on the two-surface grid: half kinetic, half potential, full dipole mixing,
// half potential, half kinetic. psi0 holds the ground surface then the excited surface.
PropagationResult split_operator_propagate(const SpatialGrid& grid, const SurfaceModel& model,
                                           const PulseSpec& pulse, const Eigen::VectorXcd& psi0,
                                           const StepConfig& cfg);

enum class MagnusOrder { midpoint = 2, gauss4 = 4 };

struct OracleConfig {
    double initial_substep = 0.05;
    double tolerance = 1e-11;
    int max_doublings = 14;
    MagnusOrder order = MagnusOrder::gauss4;
    int max_dimension = 64;
};

struct OracleResult {
    WavefunctionSeries series;
    long substeps_per_unit_time = 0;  // substep density of the accepted run
    double change = 0.0; // final-probability change against the previous doubling
};

// Exponential integrator with matrix exponentials of sampled Hamiltonians on fine substeps.
// Substeps double until the final probabilities change by less than the tolerance.
OracleResult dense_expm_oracle(const HamiltonianProvider& h, const Eigen::VectorXcd& psi0,
                               const std::vector<double>& times, const OracleConfig& cfg = {});

// Span estimate max(E) + N 2 pi / T of the Floquet spectrum.
double chebyshev_energy_span(double max_energy, int n_modes, double total_time);
// Ceiling of Delta E T / 2 (hbar = 1).
long chebyshev_iteration_bound(double energy_span, double total_time);

// Grid wavefunctions to eigenbasis coefficients.
WavefunctionSeries project_to_basis(const ComplexEigenbasis& basis, const WavefunctionSeries& grid_series);

}  // namespace catm
