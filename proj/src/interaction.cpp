#include "catm/interaction.hpp"

#include <cmath>

#include "catm/error.hpp"

namespace catm {

namespace {

const cplx I(0.0, 1.0);

bool passes(cplx e, double threshold) { return e.imag() >= -threshold; }

}  // namespace

void RepresentationConfig::validate() const {
    if (!(im_threshold > 0.0))
        throw ConfigError("interaction-representation", "representation.im_threshold",
                          "must be positive");
}

const char* representation_name(Representation mode) {
    switch (mode) {
        case Representation::direct: return "direct";
        case Representation::full: return "full";
        case Representation::real_part: return "real";
    }
    return "direct";
}

Representation parse_representation(const std::string& name) {
    if (name == "direct") return Representation::direct;
    if (name == "full") return Representation::full;
    if (name == "real" || name == "real-part") return Representation::real_part;
    throw ConfigError("interaction-representation", "representation.mode",
                      "unknown mode '" + name + "'");
}

cplx transformed_coupling_full(int i, int j, cplx mu_ij, cplx e_i, cplx e_j, double field,
                               double t, double im_threshold) {
    if (i == j) return 0.0;
    if (!passes(e_i, im_threshold) || !passes(e_j, im_threshold)) return 0.0;
    return mu_ij * field * std::exp(-I * (e_j - e_i) * t);
}

cplx transformed_coupling_real(int i, int j, cplx mu_ij, cplx e_i, cplx e_j, double field,
                               double t) {
    if (i == j) return I * e_j.imag();
    return mu_ij * field * std::exp(-I * (e_j.real() - e_i.real()) * t);
}

Eigen::VectorXcd representation_diagonal(const Eigen::VectorXcd& energies, Representation mode) {
    switch (mode) {
        case Representation::direct: return energies;
        case Representation::full: return Eigen::VectorXcd::Zero(energies.size());
        case Representation::real_part: return I * energies.imag().cast<cplx>();
    }
    return energies;
}

std::vector<bool> coupling_state_mask(const Eigen::VectorXcd& energies,
                                      const RepresentationConfig& config) {
    std::vector<bool> keep(energies.size(), true);
    if (config.mode != Representation::full) return keep;
    for (Eigen::Index j = 0; j < energies.size(); ++j)
        keep[j] = passes(energies[j], config.im_threshold);
    return keep;
}

int filtered_pair_count(const Eigen::MatrixXcd& dipole, const Eigen::VectorXcd& energies,
                        const RepresentationConfig& config) {
    const std::vector<bool> keep = coupling_state_mask(energies, config);
    int count = 0;
    for (Eigen::Index i = 0; i < dipole.rows(); ++i)
        for (Eigen::Index j = i + 1; j < dipole.cols(); ++j)
            if ((dipole(i, j) != 0.0 || dipole(j, i) != 0.0) && !(keep[i] && keep[j])) ++count;
    return count;
}

Eigen::VectorXcd frame_phase(const Eigen::VectorXcd& energies, Representation mode, double t) {
    Eigen::VectorXcd p(energies.size());
    for (Eigen::Index j = 0; j < energies.size(); ++j) {
        switch (mode) {
            case Representation::direct: p[j] = 1.0; break;
            case Representation::full: p[j] = std::exp(I * energies[j] * t); break;
            case Representation::real_part: p[j] = std::exp(I * energies[j].real() * t); break;
        }
    }
    return p;
}

Eigen::VectorXcd back_transform(const Eigen::VectorXcd& psi, double t,
                                const Eigen::VectorXcd& energies, Representation mode) {
    if (mode == Representation::direct) return psi;
    Eigen::VectorXcd out(psi.size());
    for (Eigen::Index j = 0; j < psi.size(); ++j) {
        const cplx e = mode == Representation::full ? energies[j] : cplx(energies[j].real(), 0.0);
        out[j] = psi[j] * std::exp(-I * e * t);
    }
    return out;
}

Eigen::MatrixXcd back_transform(const Eigen::MatrixXcd& series, const std::vector<double>& times,
                                const Eigen::VectorXcd& energies, Representation mode) {
    if (static_cast<size_t>(series.cols()) != times.size())
        throw Error("interaction-representation", "series and time list differ in length");
    Eigen::MatrixXcd out(series.rows(), series.cols());
    for (Eigen::Index k = 0; k < series.cols(); ++k)
        out.col(k) = back_transform(Eigen::VectorXcd(series.col(k)), times[k], energies, mode);
    return out;
}

}  // namespace catm
