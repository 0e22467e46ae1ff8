#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace catm {

using cplx = std::complex<double>;

enum class Representation { direct, full, real_part };

struct RepresentationConfig {
    Representation mode = Representation::direct;
    double im_threshold = 0.5;  // full mode drops couplings of states with Im(E) < -im_threshold

    void validate() const;
};

const char* representation_name(Representation mode);
Representation parse_representation(const std::string& name);

// H~_ij(t) = mu_ij E(t) exp(-i (E_j - E_i) t), zero on the diagonal and for filtered pairs.
cplx transformed_coupling_full(int i, int j, cplx mu_ij, cplx e_i, cplx e_j, double field,
                               double t, double im_threshold);
// Off-diagonal mu_ij E(t) exp(-i (Re E_j - Re E_i) t); diagonal i Im(E_j).
cplx transformed_coupling_real(int i, int j, cplx mu_ij, cplx e_i, cplx e_j, double field,
                               double t);

// Diagonal energies of the transformed Hamiltonian: E_j, 0, or i Im(E_j).
Eigen::VectorXcd representation_diagonal(const Eigen::VectorXcd& energies, Representation mode);

// States kept by the full-mode filter (all states in other modes).
std::vector<bool> coupling_state_mask(const Eigen::VectorXcd& energies,
                                      const RepresentationConfig& config);
// Number of unordered pairs i < j with nonzero coupling removed by the filter.
int filtered_pair_count(const Eigen::MatrixXcd& dipole, const Eigen::VectorXcd& energies,
                        const RepresentationConfig& config);

// Frame phases exp(+i eps_j t) with eps = E (full) or Re E (real), ones in direct mode.
Eigen::VectorXcd frame_phase(const Eigen::VectorXcd& energies, Representation mode, double t);

// Psi_j(t) = Psi~_j(t) exp(-i eps_j t). Columns of `series` are states at `times`.
Eigen::MatrixXcd back_transform(const Eigen::MatrixXcd& series, const std::vector<double>& times,
                                const Eigen::VectorXcd& energies, Representation mode);
Eigen::VectorXcd back_transform(const Eigen::VectorXcd& psi, double t,
                                const Eigen::VectorXcd& energies, Representation mode);

}  // namespace catm
