#include "catm/spatial_model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "catm/error.hpp"

namespace catm {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

struct Decomposition {
    Eigen::VectorXcd energies;
    Eigen::MatrixXcd right;
    Eigen::MatrixXcd left;
};

// Scales columns of `right` to unit c-norm sum_x r(x)^2 weight = 1.
void c_normalize(Eigen::MatrixXcd& right, const Eigen::VectorXcd& energies, double weight) {
    for (Eigen::Index j = 0; j < right.cols(); ++j) {
        right.col(j).normalize();
        const cplx cnorm = (right.col(j).transpose() * right.col(j))(0, 0) * weight;
        if (std::abs(cnorm) / weight < 1e-8) {
            throw Error("spatial-model", "defective or near-defective eigenvector for E = (" +
                                             std::to_string(energies[j].real()) + ", " +
                                             std::to_string(energies[j].imag()) + ")");
        }
        right.col(j) /= std::sqrt(cnorm);
    }
}

Decomposition decompose(const Eigen::MatrixXcd& h, double weight) {
    const Eigen::Index n = h.rows();
    Decomposition d;
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    const double herm_err = (h - h.adjoint()).cwiseAbs().maxCoeff();
    if (herm_err <= 1e-14 * scale) {
        const double imag_max = h.imag().cwiseAbs().maxCoeff();
        if (imag_max == 0.0) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
            d.energies = es.eigenvalues().cast<cplx>();
            d.right = es.eigenvectors().cast<cplx>() / std::sqrt(weight);
            d.left = d.right;
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
            d.energies = es.eigenvalues().cast<cplx>();
            d.right = es.eigenvectors() / std::sqrt(weight);
            d.left = d.right.conjugate();
        }
        return d;
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw Error("spatial-model", "eigendecomposition failed");
    d.energies = es.eigenvalues();
    d.right = es.eigenvectors();
    const double sym_err = (h - h.transpose()).cwiseAbs().maxCoeff();
    if (sym_err <= 1e-14 * scale) {
        c_normalize(d.right, d.energies, weight);
        const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
        Eigen::MatrixXcd delta = d.right.transpose() * d.right * weight - id;
        if (delta.cwiseAbs().maxCoeff() <= 1e-6) {
            // Symmetric first-order correction keeps left = right while restoring c-orthonormality.
            d.right = d.right * (id - 0.5 * delta);
            delta = d.right.transpose() * d.right * weight - id;
        }
        d.left = d.right;
        if (delta.cwiseAbs().maxCoeff() <= 1e-10) return d;
    } else {
        for (Eigen::Index j = 0; j < n; ++j) d.right.col(j).normalize();
    }
    d.left = d.right.inverse().transpose() / weight;
    return d;
}

void sort_and_truncate(Decomposition& d, const TruncationOptions& trunc,
                       std::vector<int>* labels) {
    const Eigen::Index n = d.energies.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return d.energies[a].real() < d.energies[b].real();
    });
    Eigen::Index keep = n;
    if (trunc.max_states > 0) keep = std::min<Eigen::Index>(keep, trunc.max_states);
    if (trunc.energy_cutoff) {
        Eigen::Index below = 0;
        while (below < keep && d.energies[order[below]].real() <= *trunc.energy_cutoff) ++below;
        keep = below;
    }
    if (keep == 0) throw Error("spatial-model", "truncation leaves no states");
    Decomposition out;
    out.energies.resize(keep);
    out.right.resize(d.right.rows(), keep);
    out.left.resize(d.left.rows(), keep);
    std::vector<int> new_labels;
    for (Eigen::Index k = 0; k < keep; ++k) {
        out.energies[k] = d.energies[order[k]];
        out.right.col(k) = d.right.col(order[k]);
        out.left.col(k) = d.left.col(order[k]);
        if (labels) new_labels.push_back((*labels)[order[k]]);
    }
    d = std::move(out);
    if (labels) *labels = std::move(new_labels);
}

}  // namespace

Eigen::VectorXd SpatialGrid::points() const {
    Eigen::VectorXd p(n_points);
    for (int i = 0; i < n_points; ++i) p[i] = x(i);
    return p;
}

Eigen::VectorXd SpatialGrid::wavenumbers() const {
    Eigen::VectorXd k(n_points);
    const double unit = 2.0 * std::numbers::pi / (x_max - x_min);
    for (int m = 0; m < n_points; ++m) k[m] = unit * (m < n_points / 2 ? m : m - n_points);
    return k;
}

void SpatialGrid::validate() const {
    if (!is_power_of_two(n_points))
        throw ConfigError("spatial-model", "model.grid.n_points", "must be a power of two");
    if (!(x_max > x_min)) throw ConfigError("spatial-model", "model.grid", "x_max must exceed x_min");
}

cplx CapParams::value(double x) const {
    if (x <= onset) return 0.0;
    return cplx(0.0, -eta * std::pow(x - onset, order));
}

SurfaceModel make_surface_model(const SurfaceParams& p, const SpatialGrid& grid) {
    SurfaceModel m;
    m.ground_potential = [D = p.morse_depth, a = p.morse_width, x0 = p.morse_center](double x) {
        const double e = 1.0 - std::exp(-a * (x - x0));
        return D * e * e;
    };
    m.excited_potential = [A = p.excited_amplitude, b = p.excited_decay, s = p.excited_shift](double x) {
        return A * std::exp(-b * x) + s;
    };
    m.dipole_function = [mu0 = p.dipole_strength, xc = p.dipole_range](double x) {
        return mu0 * x * std::exp(-x / xc);
    };
    m.cap.eta = p.cap_strength;
    m.cap.onset = grid.x_min + p.cap_onset_fraction * (grid.x_max - grid.x_min);
    m.cap.order = p.cap_order;
    m.cap_enabled = p.cap_strength > 0.0;
    m.mass = p.mass;
    m.energy_cutoff = p.energy_cutoff;
    return m;
}

void validate_surface_model(const SurfaceModel& model, const SpatialGrid& grid) {
    grid.validate();
    if (!model.ground_potential || !model.excited_potential || !model.dipole_function)
        throw ConfigError("spatial-model", "model", "potentials and dipole must be defined");
    if (!(model.mass > 0.0)) throw ConfigError("spatial-model", "model.mass", "must be positive");
    if (model.cap_enabled) {
        if (!(model.cap.eta > 0.0))
            throw ConfigError("spatial-model", "model.cap.eta", "must be positive");
        if (!(model.cap.onset > grid.x_min && model.cap.onset < grid.x_max))
            throw ConfigError("spatial-model", "model.cap.onset_fraction",
                              "onset must lie inside the grid");
        if (model.cap.order < 1)
            throw ConfigError("spatial-model", "model.cap.order", "must be at least 1");
    }
    if (model.energy_cutoff > 0.0 && std::isfinite(model.mass)) {
        const double kmax = std::numbers::pi / grid.dx();
        const double emax = kmax * kmax / (2.0 * model.mass);
        if (emax < model.energy_cutoff)
            throw ConfigError("spatial-model", "model.grid.n_points",
                              "grid too coarse: Nyquist kinetic energy " + std::to_string(emax) +
                                  " below the energy cutoff " + std::to_string(model.energy_cutoff));
    }
}

Eigen::MatrixXd kinetic_matrix(const SpatialGrid& grid, double mass) {
    const int n = grid.n_points;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    if (!std::isfinite(mass)) return k;
    const Eigen::VectorXd kw = grid.wavenumbers();
    Eigen::VectorXd column(n);
    for (int d = 0; d <= n / 2; ++d) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += kw[m] * kw[m] * std::cos(kw[m] * d * grid.dx());
        column[d] = s / (2.0 * mass * n);
        column[(n - d) % n] = column[d];
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) k(a, b) = column[(a - b + n) % n];
    return k;
}

Eigen::MatrixXcd build_h0_grid(const SpatialGrid& grid, const SurfaceModel& model) {
    validate_surface_model(model, grid);
    const int n = grid.n_points;
    const Eigen::MatrixXd kin = kinetic_matrix(grid, model.mass);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    h.topLeftCorner(n, n) = kin.cast<cplx>();
    h.bottomRightCorner(n, n) = kin.cast<cplx>();
    for (int i = 0; i < n; ++i) {
        const double x = grid.x(i);
        const cplx cap = model.cap_enabled ? model.cap.value(x) : cplx(0.0);
        h(i, i) += model.ground_potential(x) + cap;
        h(n + i, n + i) += model.excited_potential(x) + cap;
    }
    return h;
}

double ComplexEigenbasis::biorthogonality_error() const {
    const Eigen::MatrixXcd gram = left_vectors.transpose() * right_vectors * weight;
    return (gram - Eigen::MatrixXcd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

Eigen::VectorXcd ComplexEigenbasis::project(const Eigen::VectorXcd& psi) const {
    return left_vectors.transpose() * psi * weight;
}

Eigen::VectorXcd ComplexEigenbasis::expand(const Eigen::VectorXcd& coefficients) const {
    return right_vectors * coefficients;
}

ComplexEigenbasis prediagonalize(const Eigen::MatrixXcd& h0, double weight,
                                 const TruncationOptions& truncation) {
    if (h0.rows() != h0.cols() || h0.rows() == 0)
        throw Error("spatial-model", "Hamiltonian must be square and nonempty");
    if (!h0.allFinite()) throw Error("spatial-model", "Hamiltonian has non-finite entries");
    Decomposition d = decompose(h0, weight);
    sort_and_truncate(d, truncation, nullptr);
    ComplexEigenbasis basis;
    basis.energies = d.energies;
    basis.right_vectors = d.right;
    basis.left_vectors = d.left;
    basis.weight = weight;
    basis.dipole_matrix = Eigen::MatrixXcd::Zero(d.energies.size(), d.energies.size());
    return basis;
}

Eigen::MatrixXcd project_dipole(const SpatialGrid& grid, const SurfaceModel& model,
                                const ComplexEigenbasis& basis) {
    const int n = grid.n_points;
    if (basis.right_vectors.rows() != 2 * n || basis.left_vectors.rows() != 2 * n)
        throw Error("spatial-model", "basis does not match the two-surface grid");
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) mu[i] = model.dipole_function(grid.x(i));
    const auto lg = basis.left_vectors.topRows(n);
    const auto le = basis.left_vectors.bottomRows(n);
    const auto rg = basis.right_vectors.topRows(n);
    const auto re = basis.right_vectors.bottomRows(n);
    const Eigen::MatrixXcd mrg = mu.asDiagonal() * rg;
    const Eigen::MatrixXcd mre = mu.asDiagonal() * re;
    return (lg.transpose() * mre + le.transpose() * mrg) * grid.dx();
}

ComplexEigenbasis build_eigenbasis(const SpatialGrid& grid, const SurfaceModel& model,
                                   const TruncationOptions& truncation) {
    const Eigen::MatrixXcd h0 = build_h0_grid(grid, model);
    const int n = grid.n_points;
    const double w = grid.dx();
    Decomposition g = decompose(h0.topLeftCorner(n, n), w);
    Decomposition e = decompose(h0.bottomRightCorner(n, n), w);
    Decomposition all;
    all.energies.resize(2 * n);
    all.energies << g.energies, e.energies;
    all.right = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    all.left = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    all.right.topLeftCorner(n, n) = g.right;
    all.right.bottomRightCorner(n, n) = e.right;
    all.left.topLeftCorner(n, n) = g.left;
    all.left.bottomRightCorner(n, n) = e.left;
    std::vector<int> labels(2 * n, 0);
    std::fill(labels.begin() + n, labels.end(), 1);
    sort_and_truncate(all, truncation, &labels);

    ComplexEigenbasis basis;
    basis.energies = all.energies;
    basis.right_vectors = all.right;
    basis.left_vectors = all.left;
    basis.surface = labels;
    basis.weight = w;
    basis.dipole_matrix = project_dipole(grid, model, basis);
    return basis;
}

std::vector<int> select_bound_states(const ComplexEigenbasis& basis, double threshold,
                                     double im_cutoff) {
    std::vector<int> bound;
    for (int j = 0; j < basis.n_states(); ++j) {
        const bool ground = basis.surface.empty() || basis.surface[j] == 0;
        if (ground && basis.energies[j].real() < threshold &&
            std::abs(basis.energies[j].imag()) < im_cutoff)
            bound.push_back(j);
    }
    return bound;
}

}  // namespace catm
