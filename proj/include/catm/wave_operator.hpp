#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "catm/floquet_operator.hpp"

namespace catm {

using cplx = std::complex<double>;
// n_states x N array, molecular index fastest within one time block.
using ExtendedVector = Eigen::MatrixXcd;

// Active extended-basis vector alpha = (state, n = 0).
struct ActiveProjector {
    int state = 0;

    static ActiveProjector from_initial_state(const Eigen::VectorXcd& initial_state);
};

struct SolverSettings {
    double tolerance = 1e-12;
    int max_iterations = 5000;
    bool use_krylov = false;
    int k_max = 50;
    bool freeze_distortion = false;
    int stagnation_window = 100;
    double stagnation_factor = 0.999;
    int growth_window = 10;
    double growth_factor = 1e6;
    double denominator_floor = 1e-14;

    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    double residual = 0.0;
    cplx effective_energy;
};

using IterationLog = std::function<void(const IterationRecord&)>;

// Reduced wave-operator column X (FBR layout, alpha component zero) and its history.
struct RdwaState {
    ExtendedVector x;
    cplx effective_energy;
    int iterations = 0;
    std::vector<double> residuals;
};

// Every DVR block equals the initial state.
ExtendedVector build_trial(const Eigen::VectorXcd& initial_state, const TimeGrid& grid);

// Recursive distorted-wave update in the FBR basis.
class RdwaIteration {
public:
    RdwaIteration(const FloquetOperator& op, ActiveProjector proj, SolverSettings settings = {});

    RdwaState initial_state(const ExtendedVector& trial_dvr) const;
    // One update. Returns the residual of the state before the update; converged states are left unchanged.
    double step(RdwaState& state);

    // Intermediate-normalized column P0 + X.
    ExtendedVector column(const RdwaState& state) const;
    // Correction dX for a candidate column omega with residual r and energy e.
    ExtendedVector correction(const ExtendedVector& omega, const ExtendedVector& residual,
                              cplx energy);
    const ExtendedVector& last_image() const { return image_; }
    const ActiveProjector& projector() const { return proj_; }

private:
    const FloquetOperator& op_;
    ActiveProjector proj_;
    SolverSettings settings_;
    ExtendedVector diagonal_;
    ExtendedVector row_;
    ExtendedVector frozen_;
    bool have_frozen_ = false;
    ExtendedVector image_;
};

// Orthonormal correction subspace in the FBR basis with reduced matrix V^H H V.
class KrylovBasis {
public:
    explicit KrylovBasis(const FloquetOperator& op) : op_(op) {}

    int size() const { return static_cast<int>(vectors_.size()); }
    const std::vector<ExtendedVector>& vectors() const { return vectors_; }
    const std::vector<ExtendedVector>& images() const { return images_; }
    const Eigen::MatrixXcd& reduced_matrix() const { return reduced_; }
    void clear();

    // Gram-Schmidt with one re-orthogonalization pass. Returns false on linear dependence.
    bool extend(const ExtendedVector& correction);

    struct Candidate {
        cplx energy;
        Eigen::VectorXcd coefficients;
        ExtendedVector vector;  // V y
        ExtendedVector image;   // H V y
        double overlap = 0.0;
    };
    // Ritz vector whose t = 0 block is best aligned with the initial state (normalized overlap).
    Candidate select(const Eigen::VectorXcd& initial_state) const;

private:
    const FloquetOperator& op_;
    std::vector<ExtendedVector> vectors_;
    std::vector<ExtendedVector> images_;
    Eigen::MatrixXcd reduced_;
};

struct FloquetSolution {
    cplx eigenvalue;          // effective energy at convergence
    cplx refined_eigenvalue;  // Rayleigh quotient of the converged vector
    ExtendedVector fbr;       // intermediate-normalized eigenvector, FBR layout
    cplx alpha_component = 1.0;
    bool converged = false;
    double residual = 0.0;          // ||(H - eigenvalue) lambda|| / ||lambda||
    double refined_residual = 0.0;  // same with the refined eigenvalue
    int iterations = 0;
    int pivot = 0;
    std::vector<double> history;
    Eigen::VectorXcd initial_state;
    cplx scale = 1.0;  // maps the t = 0 block onto the initial state's pivot amplitude
    long transform_passes = 0;
};

// Solves the constrained Floquet eigenproblem connected to the initial state.
// Throws ConvergenceError with the residual history on failure.
FloquetSolution solve_constrained_floquet(const FloquetOperator& op,
                                          const Eigen::VectorXcd& initial_state,
                                          const SolverSettings& settings = {},
                                          const IterationLog& log = {});

// ||(H - E) lambda|| / ||lambda|| with an explicit operator application.
double eigen_residual(const FloquetOperator& op, const ExtendedVector& fbr, cplx energy);

}  // namespace catm
