#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

namespace catm {

using cplx = std::complex<double>;

// Uniform periodic coordinate grid x_i = x_min + i dx, dx = (x_max - x_min) / n_points.
struct SpatialGrid {
    int n_points = 256;
    double x_min = 0.0;
    double x_max = 1.0;

    double dx() const { return (x_max - x_min) / n_points; }
    double x(int i) const { return x_min + i * dx(); }
    Eigen::VectorXd points() const;
    // Angular wavenumbers of the discrete Fourier grid, in transform order.
    Eigen::VectorXd wavenumbers() const;
    void validate() const;
};

// Radial absorbing potential -i eta (x - onset)^order for x > onset.
struct CapParams {
    double eta = 0.0;
    double onset = 0.0;
    int order = 2;

    cplx value(double x) const;
};

// Two uncoupled electronic surfaces with a transition dipole between them.
struct SurfaceModel {
    std::function<double(double)> ground_potential;
    std::function<double(double)> excited_potential;
    std::function<double(double)> dipole_function;
    CapParams cap;
    double mass = 918.0;
    // Highest kinetic energy that must be resolved on the grid; zero disables the check.
    double energy_cutoff = 0.0;
    bool cap_enabled = true;
};

// Parameters of the default synthetic model: Morse ground surface, repulsive excited surface.
struct SurfaceParams {
    double morse_depth = 0.103;
    double morse_width = 0.72;
    double morse_center = 2.0;
    double excited_amplitude = 0.38;
    double excited_decay = 0.9;
    double excited_shift = 0.096;
    double dipole_strength = 1.0;
    double dipole_range = 2.0;
    double cap_strength = 0.01;
    double cap_onset_fraction = 0.75;
    int cap_order = 2;
    double mass = 918.0;
    double energy_cutoff = 0.0;
};

SurfaceModel make_surface_model(const SurfaceParams& params, const SpatialGrid& grid);
void validate_surface_model(const SurfaceModel& model, const SpatialGrid& grid);

// Biorthogonal eigenpairs: left_i^T right_j * weight = delta_ij (c-product, no conjugation).
struct ComplexEigenbasis {
    Eigen::VectorXcd energies;
    Eigen::MatrixXcd right_vectors;
    Eigen::MatrixXcd left_vectors;
    Eigen::MatrixXcd dipole_matrix;
    std::vector<int> surface;  // surface label per state (0 ground, 1 excited), empty if unknown
    double weight = 1.0;       // quadrature weight of the c-product

    int n_states() const { return static_cast<int>(energies.size()); }
    double biorthogonality_error() const;
    // Coefficients c_j = weight * left_j^T psi.
    Eigen::VectorXcd project(const Eigen::VectorXcd& psi) const;
    Eigen::VectorXcd expand(const Eigen::VectorXcd& coefficients) const;
};

struct TruncationOptions {
    int max_states = 0;                   // 0 keeps every state
    std::optional<double> energy_cutoff;  // keep Re(E) <= cutoff
};

// Periodic spectral kinetic matrix hbar^2 k^2 / 2m for one surface.
Eigen::MatrixXd kinetic_matrix(const SpatialGrid& grid, double mass);

// Two-surface block Hamiltonian K + V + CAP (no inter-surface coupling), 2 n_points square.
Eigen::MatrixXcd build_h0_grid(const SpatialGrid& grid, const SurfaceModel& model);

// Full eigendecomposition sorted by Re(E). Left vectors satisfy the c-product relation.
ComplexEigenbasis prediagonalize(const Eigen::MatrixXcd& h0, double weight = 1.0,
                                 const TruncationOptions& truncation = {});

// mu_ij = sum_x left_i(x) mu(x) right_j(x) dx over the inter-surface blocks.
Eigen::MatrixXcd project_dipole(const SpatialGrid& grid, const SurfaceModel& model,
                                const ComplexEigenbasis& basis);

// Per-surface diagonalization, merged by Re(E), truncated, with dipole matrix.
ComplexEigenbasis build_eigenbasis(const SpatialGrid& grid, const SurfaceModel& model,
                                   const TruncationOptions& truncation);

// Ground-surface states below the dissociation threshold with |Im E| < im_cutoff.
std::vector<int> select_bound_states(const ComplexEigenbasis& basis, double threshold,
                                     double im_cutoff);

}  // namespace catm
