#include "catm/wave_operator.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "catm/error.hpp"

namespace catm {

namespace {

cplx inner(const ExtendedVector& a, const ExtendedVector& b) {
    return (a.conjugate().cwiseProduct(b)).sum();
}

}  // namespace

void KrylovBasis::clear() {
    vectors_.clear();
    images_.clear();
    reduced_.resize(0, 0);
}

bool KrylovBasis::extend(const ExtendedVector& correction) {
    const double input_norm = correction.norm();
    if (!(input_norm > 0.0) || !correction.allFinite()) return false;
    ExtendedVector v = correction / input_norm;
    for (int pass = 0; pass < 2; ++pass)
        for (const ExtendedVector& e : vectors_) v -= inner(e, v) * e;
    const double n = v.norm();
    if (n <= 1e-12) return false;
    v /= n;
    ExtendedVector hv = op_.apply_fbr(v);
    const int k = size();
    Eigen::MatrixXcd next(k + 1, k + 1);
    if (k > 0) next.topLeftCorner(k, k) = reduced_;
    for (int i = 0; i < k; ++i) {
        next(i, k) = inner(vectors_[i], hv);
        next(k, i) = inner(v, images_[i]);
    }
    next(k, k) = inner(v, hv);
    reduced_ = std::move(next);
    vectors_.push_back(std::move(v));
    images_.push_back(std::move(hv));
    return true;
}

KrylovBasis::Candidate KrylovBasis::select(const Eigen::VectorXcd& initial_state) const {
    const int k = size();
    if (k == 0) throw Error("wave-operator-solver", "empty Krylov basis");
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(reduced_);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("wave-operator-solver", "reduced eigensolve failed", {});
    const int N = op_.grid().n_modes;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(N));
    const double psi_norm = initial_state.norm();

    // t = 0 block of every basis vector.
    Eigen::MatrixXcd blocks(initial_state.size(), k);
    for (int i = 0; i < k; ++i) blocks.col(i) = vectors_[i].rowwise().sum() * inv_sqrt_n;
    const Eigen::RowVectorXcd proj = initial_state.adjoint() * blocks;

    int best = -1;
    double best_overlap = 0.0;
    for (int c = 0; c < k; ++c) {
        const Eigen::VectorXcd y = es.eigenvectors().col(c);
        const double block_norm = (blocks * y).norm();
        const double ov = block_norm > 0.0 ? std::abs((proj * y)(0, 0)) / (block_norm * psi_norm) : 0.0;
        if (best < 0) {
            best = c;
            best_overlap = ov;
            continue;
        }
        const double tie = 1e-12 * std::max(ov, best_overlap);
        if (ov > best_overlap + tie ||
            (std::abs(ov - best_overlap) <= tie &&
             std::abs(es.eigenvalues()[c].imag()) < std::abs(es.eigenvalues()[best].imag()))) {
            best = c;
            best_overlap = ov;
        }
    }
    if (best_overlap < 1e-6)
        throw ConvergenceError("wave-operator-solver",
                               "Ritz selection failed: all overlaps below 1e-6", {});
    Candidate cand;
    cand.energy = es.eigenvalues()[best];
    cand.coefficients = es.eigenvectors().col(best);
    cand.overlap = best_overlap;
    cand.vector = ExtendedVector::Zero(vectors_[0].rows(), vectors_[0].cols());
    cand.image = ExtendedVector::Zero(vectors_[0].rows(), vectors_[0].cols());
    for (int i = 0; i < k; ++i) {
        cand.vector += cand.coefficients[i] * vectors_[i];
        cand.image += cand.coefficients[i] * images_[i];
    }
    return cand;
}

}  // namespace catm
