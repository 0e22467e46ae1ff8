#pragma once

#include <Eigen/Dense>
#include <complex>

namespace catm {

using cplx = std::complex<double>;

enum class AbsorberShape {
    sinc2,          // -i V0 sinc^2((t - t_m') / dT)
    tapered_sinc2,  // sinc^2 bell multiplied by smooth switch-on and switch-off ramps
};

// Time-dependent absorbing amplitude on the tail [T0, T0 + dT], zero elsewhere.
struct AbsorberEnvelope {
    double amplitude = 0.0;  // V0
    double window_start = 0.0;
    double window_length = 0.0;
    AbsorberShape shape = AbsorberShape::tapered_sinc2;
    double taper_fraction = 0.3;  // ramp length per edge as a fraction of the window

    double center() const { return window_start + 0.5 * window_length; }
    void validate() const;
};

cplx evaluate_absorber(const AbsorberEnvelope& env, double t);

// C-infinity step rising from 0 at u <= 0 to 1 at u >= 1.
double smooth_step(double u);

// Constrained absorbing operator. One time block acts as
//   out_j = V(t) b_j + c_j(t) b_l   for j != l,   out_l = 0,
// with pivot l = argmax |psi0_j| (lowest index on ties). For a stationary target psi0,
// c_j(t) = f_j (V(t) + E_j - E_l) with f_j = -psi0_j / psi0_l, applied wherever V(t) != 0.
// For a comoving target phi(t) = exp(-i D (t - t_ref)) phi, c_j(t) = V(t) f_j exp(-i (D_j - D_l)(t - t_ref)),
// so the target follows the free diagonal evolution and no energy terms enter.
class ConstrainedAbsorber {
public:
    ConstrainedAbsorber(AbsorberEnvelope envelope, const Eigen::VectorXcd& initial_state,
                        const Eigen::VectorXcd& diagonal_energies);

    static ConstrainedAbsorber comoving(AbsorberEnvelope envelope, const Eigen::VectorXcd& target,
                                        const Eigen::VectorXcd& diagonal_energies,
                                        double reference_time, int pivot);

    const AbsorberEnvelope& envelope() const { return envelope_; }
    int pivot() const { return pivot_; }
    const Eigen::VectorXcd& column_factors() const { return factors_; }
    const Eigen::VectorXcd& energies() const { return energies_; }
    bool pure_state() const { return pure_; }
    bool is_comoving() const { return comoving_; }
    double reference_time() const { return reference_time_; }

    // Pivot-column coefficients c_j(t), zero at the pivot.
    Eigen::VectorXcd column(double t) const;

    Eigen::VectorXcd apply_block(double t, const Eigen::VectorXcd& block) const;
    Eigen::VectorXcd apply_block_transpose(double t, const Eigen::VectorXcd& block) const;
    // Dense n x n block at time t.
    Eigen::MatrixXcd block_matrix(double t) const;

    // Accumulates the absorber action over an n x N array. values holds V(t_k), columns holds c(t_k).
    void accumulate(const Eigen::VectorXcd& values, const Eigen::MatrixXcd& columns,
                    const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const;
    void accumulate_transpose(const Eigen::VectorXcd& values, const Eigen::MatrixXcd& columns,
                              const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const;

private:
    ConstrainedAbsorber() = default;

    AbsorberEnvelope envelope_;
    int pivot_ = 0;
    Eigen::VectorXcd factors_;
    Eigen::VectorXcd energies_;
    bool pure_ = true;
    bool comoving_ = false;
    double reference_time_ = 0.0;
};

// Index of the largest-modulus component, lowest index on ties.
int dominant_component(const Eigen::VectorXcd& v);

}  // namespace catm
