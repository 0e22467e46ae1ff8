#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <complex>
#include <optional>
#include <vector>

#include "catm/absorber.hpp"
#include "catm/interaction.hpp"
#include "catm/pulse.hpp"
#include "catm/spatial_model.hpp"
#include "catm/time_grid.hpp"

namespace catm {

using cplx = std::complex<double>;

// Molecular levels and dipole matrix in the field-free eigenbasis.
struct LevelSystem {
    Eigen::VectorXcd energies;
    Eigen::MatrixXcd dipole;

    int n_states() const { return static_cast<int>(energies.size()); }
    void validate() const;
    static LevelSystem from_basis(const ComplexEigenbasis& basis);
};

// H(t) = diag(E) + E(t) mu.
Eigen::MatrixXcd molecular_hamiltonian(const LevelSystem& system, const PulseSpec& pulse, double t);

// Absorber envelope plus the initial state that fixes the constrained columns.
struct AbsorberSetup {
    AbsorberEnvelope envelope;
    Eigen::VectorXcd initial_state;
};

// Smooth tail for one segment of a longer pulse. The field after the segment end is switched off
// over taper * dT. The last lead_in * dT of the period replays the pulse that precedes the segment,
// switched on over ramp * lead_in * dT, so the Hamiltonian is smooth across the period boundary.
// The absorber window shrinks to [T0, T - lead_in * dT] and targets the initial state propagated
// backwards through the lead-in; target components whose comoving factor would grow beyond
// max_target_growth across the window are dropped.
struct SegmentTail {
    double taper = 0.2;
    double lead_in = 0.3;
    double ramp = 1.0;
    double max_target_growth = 1e6;

    void validate() const;
};

// Matrix-free extended-space operator H(t) + V(t) - i d/dt on n_states x N arrays.
// DVR arrays hold time blocks as columns; FBR arrays hold Fourier modes as columns.
// The physical interval of the grid may be a segment of the pulse starting at time_offset.
class FloquetOperator {
public:
    FloquetOperator(LevelSystem system, PulseSpec pulse, TimeGrid grid,
                    RepresentationConfig representation = {},
                    std::optional<AbsorberSetup> absorber = std::nullopt, double time_offset = 0.0,
                    std::optional<SegmentTail> tail = std::nullopt);

    int n_states() const { return system_.n_states(); }
    const TimeGrid& grid() const { return grid_; }
    const LevelSystem& system() const { return system_; }
    const PulseSpec& pulse() const { return pulse_; }
    const RepresentationConfig& representation() const { return representation_; }
    const std::optional<ConstrainedAbsorber>& absorber() const { return absorber_; }
    double time_offset() const { return time_offset_; }
    const TimeAxisTransform& transform() const { return transform_; }
    const Eigen::VectorXcd& diagonal_energies() const { return diagonal_; }
    const Eigen::MatrixXcd& effective_dipole() const { return dipole_; }
    int filtered_pairs() const { return filtered_pairs_; }
    const std::optional<SegmentTail>& tail() const { return tail_; }
    // Start of the lead-in (the period length without a segment tail).
    double lead_in_start() const { return lead_in_start_; }
    // State the absorber holds on its window (the initial state without a segment tail).
    const Eigen::VectorXcd& absorber_target() const { return target_; }
    int dropped_target_components() const { return dropped_components_; }
    double dropped_target_weight() const { return dropped_weight_; }

    // Field at local time t on the grid. Without a segment tail it is zero beyond the physical interval.
    double field(double t) const;
    // Time at which the interaction-frame phases are evaluated (t - T inside the lead-in).
    double frame_time(double t) const;
    // Dense time-local Hamiltonian without the absorber at arbitrary local time t.
    Eigen::MatrixXcd hamiltonian_at(double t) const;
    const Eigen::VectorXd& field_samples() const { return field_; }

    // Dense n x n time-local block H~(t_k) + V(t_k).
    Eigen::MatrixXcd local_block(int k) const;

    void apply_local(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const;
    void apply_local_transpose(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const;

    // DVR in, DVR out. Two time-axis transform passes.
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& v) const;
    Eigen::MatrixXcd apply_transpose(const Eigen::MatrixXcd& v) const;
    // FBR in, FBR out. Two time-axis transform passes.
    Eigen::MatrixXcd apply_fbr(const Eigen::MatrixXcd& x) const;

    // Diagonal of the operator in the FBR basis.
    Eigen::MatrixXcd fbr_diagonal() const;
    // Row (pivot, n = 0) of the operator in the FBR basis, laid out as n_states x N.
    Eigen::MatrixXcd fbr_row(int pivot) const;

    long transform_passes() const { return passes_.load(); }
    void reset_transform_passes() const { passes_ = 0; }

private:
    LevelSystem system_;
    PulseSpec pulse_;
    TimeGrid grid_;
    RepresentationConfig representation_;
    std::optional<ConstrainedAbsorber> absorber_;
    double time_offset_;
    std::optional<SegmentTail> tail_;
    double lead_in_start_ = 0.0;
    TimeAxisTransform transform_;
    Eigen::VectorXcd target_;
    int dropped_components_ = 0;
    double dropped_weight_ = 0.0;
    Eigen::VectorXcd diagonal_;
    Eigen::MatrixXcd dipole_;
    Eigen::VectorXd field_;
    Eigen::VectorXcd absorber_values_;
    Eigen::MatrixXcd absorber_columns_;
    Eigen::MatrixXcd phase_plus_;
    Eigen::MatrixXcd phase_minus_;
    Eigen::VectorXd lambda_;
    Eigen::VectorXd lambda_transpose_;
    std::vector<bool> keep_;
    int filtered_pairs_ = 0;
    mutable std::atomic<long> passes_{0};
};

}  // namespace catm
