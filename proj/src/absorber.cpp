#include "catm/absorber.hpp"

#include <cmath>

#include "catm/error.hpp"

namespace catm {

namespace {

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

double ramp_kernel(double u) { return u <= 0.0 ? 0.0 : std::exp(-1.0 / u); }

}  // namespace

double smooth_step(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double a = ramp_kernel(u);
    return a / (a + ramp_kernel(1.0 - u));
}

void AbsorberEnvelope::validate() const {
    if (!(amplitude >= 0.0)) throw ConfigError("floquet-core", "absorber.V0", "must be nonnegative");
    if (!(window_length > 0.0))
        throw ConfigError("floquet-core", "time_grid.dT", "absorbing window must be positive");
    if (!(taper_fraction > 0.0 && taper_fraction <= 0.5))
        throw ConfigError("floquet-core", "absorber.taper_fraction", "must lie in (0, 0.5]");
}

cplx evaluate_absorber(const AbsorberEnvelope& env, double t) {
    const double s = (t - env.window_start) / env.window_length;
    if (s < 0.0 || s > 1.0) return 0.0;
    const double bell = sinc((t - env.center()) / env.window_length);
    double value = bell * bell;
    if (env.shape == AbsorberShape::tapered_sinc2)
        value *= smooth_step(s / env.taper_fraction) * smooth_step((1.0 - s) / env.taper_fraction);
    return cplx(0.0, -env.amplitude * value);
}

int dominant_component(const Eigen::VectorXcd& v) {
    int best = 0;
    for (int j = 1; j < v.size(); ++j)
        if (std::abs(v[j]) > std::abs(v[best]) * (1.0 + 1e-12)) best = j;
    return best;
}

ConstrainedAbsorber::ConstrainedAbsorber(AbsorberEnvelope envelope,
                                         const Eigen::VectorXcd& initial_state,
                                         const Eigen::VectorXcd& diagonal_energies)
    : envelope_(envelope), energies_(diagonal_energies) {
    if (initial_state.size() != diagonal_energies.size() || initial_state.size() == 0)
        throw Error("floquet-core", "initial state and energies must have equal nonzero length");
    pivot_ = dominant_component(initial_state);
    const cplx p = initial_state[pivot_];
    if (std::abs(p) < 1e-14)
        throw Error("floquet-core", "pivot amplitude below 1e-14, absorber construction rejected");
    factors_ = -initial_state / p;
    factors_[pivot_] = 0.0;
    pure_ = factors_.cwiseAbs().maxCoeff() == 0.0;
}

ConstrainedAbsorber ConstrainedAbsorber::comoving(AbsorberEnvelope envelope,
                                                  const Eigen::VectorXcd& target,
                                                  const Eigen::VectorXcd& diagonal_energies,
                                                  double reference_time, int pivot) {
    if (target.size() != diagonal_energies.size() || target.size() == 0)
        throw Error("floquet-core", "target and energies must have equal nonzero length");
    if (pivot < 0 || pivot >= target.size()) throw Error("floquet-core", "pivot index out of range");
    const cplx p = target[pivot];
    if (std::abs(p) < 1e-14)
        throw Error("floquet-core", "pivot amplitude below 1e-14, absorber construction rejected");
    ConstrainedAbsorber a;
    a.envelope_ = envelope;
    a.energies_ = diagonal_energies;
    a.pivot_ = pivot;
    a.factors_ = -target / p;
    a.factors_[pivot] = 0.0;
    a.pure_ = a.factors_.cwiseAbs().maxCoeff() == 0.0;
    a.comoving_ = true;
    a.reference_time_ = reference_time;
    return a;
}

Eigen::VectorXcd ConstrainedAbsorber::column(double t) const {
    const cplx v = evaluate_absorber(envelope_, t);
    const Eigen::Index n = factors_.size();
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n);
    if (v == 0.0 || pure_) return c;
    const cplx el = energies_[pivot_];
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == pivot_ || factors_[j] == 0.0) continue;
        if (comoving_)
            c[j] = v * factors_[j] * std::exp(cplx(0.0, -1.0) * (energies_[j] - el) * (t - reference_time_));
        else
            c[j] = factors_[j] * (v + energies_[j] - el);
    }
    return c;
}

Eigen::VectorXcd ConstrainedAbsorber::apply_block(double t, const Eigen::VectorXcd& block) const {
    const cplx v = evaluate_absorber(envelope_, t);
    Eigen::VectorXcd out = v * block;
    out[pivot_] = 0.0;
    if (v == 0.0) return out;
    return out + column(t) * block[pivot_];
}

Eigen::VectorXcd ConstrainedAbsorber::apply_block_transpose(double t,
                                                            const Eigen::VectorXcd& block) const {
    const cplx v = evaluate_absorber(envelope_, t);
    Eigen::VectorXcd out = v * block;
    out[pivot_] = 0.0;
    if (v == 0.0) return out;
    out[pivot_] += column(t).cwiseProduct(block).sum();
    return out;
}

Eigen::MatrixXcd ConstrainedAbsorber::block_matrix(double t) const {
    const int n = static_cast<int>(factors_.size());
    Eigen::MatrixXcd m(n, n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
        e[j] = 1.0;
        m.col(j) = apply_block(t, e);
    }
    return m;
}

void ConstrainedAbsorber::accumulate(const Eigen::VectorXcd& values, const Eigen::MatrixXcd& columns,
                                     const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
    const int l = pivot_;
    for (Eigen::Index k = 0; k < in.cols(); ++k) {
        const cplx v = values[k];
        if (v == 0.0) continue;
        const cplx bl = in(l, k);
        out.col(k) += v * in.col(k);
        out(l, k) -= v * bl;
        if (!pure_) out.col(k) += columns.col(k) * bl;
    }
}

void ConstrainedAbsorber::accumulate_transpose(const Eigen::VectorXcd& values,
                                               const Eigen::MatrixXcd& columns,
                                               const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
    const int l = pivot_;
    for (Eigen::Index k = 0; k < in.cols(); ++k) {
        const cplx v = values[k];
        if (v == 0.0) continue;
        out.col(k) += v * in.col(k);
        out(l, k) -= v * in(l, k);
        if (!pure_) out(l, k) += columns.col(k).cwiseProduct(in.col(k)).sum();
    }
}

}  // namespace catm
