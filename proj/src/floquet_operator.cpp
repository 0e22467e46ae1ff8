#include "catm/floquet_operator.hpp"

#include <algorithm>
#include <cmath>

#include "catm/error.hpp"

namespace catm {

void LevelSystem::validate() const {
    const Eigen::Index n = energies.size();
    if (n == 0) throw ConfigError("floquet-core", "model", "no molecular states");
    if (dipole.rows() != n || dipole.cols() != n)
        throw ConfigError("floquet-core", "model.dipole", "dipole matrix shape mismatch");
    if (!energies.allFinite() || !dipole.allFinite())
        throw ConfigError("floquet-core", "model", "non-finite energies or dipole entries");
}

LevelSystem LevelSystem::from_basis(const ComplexEigenbasis& basis) {
    return LevelSystem{basis.energies, basis.dipole_matrix};
}

Eigen::MatrixXcd molecular_hamiltonian(const LevelSystem& system, const PulseSpec& pulse, double t) {
    Eigen::MatrixXcd h = system.dipole * evaluate_pulse(pulse, t);
    h.diagonal() += system.energies;
    return h;
}

void SegmentTail::validate() const {
    if (!(taper > 0.0 && taper < 1.0)) throw ConfigError("floquet-core", "tail.taper", "must lie in (0, 1)");
    if (!(lead_in > 0.0 && lead_in < 1.0))
        throw ConfigError("floquet-core", "tail.lead_in", "must lie in (0, 1)");
    if (!(ramp > 0.0 && ramp <= 1.0)) throw ConfigError("floquet-core", "tail.ramp", "must lie in (0, 1]");
    if (!(max_target_growth > 1.0))
        throw ConfigError("floquet-core", "tail.max_target_growth", "must exceed 1");
}

namespace {

// Propagates psi backwards from t_end to t_start under dpsi/dt = -i H(t) psi with classical RK4.
Eigen::VectorXcd propagate_backwards(const FloquetOperator& op, Eigen::VectorXcd psi, double t_end,
                                     double t_start) {
    const double span = t_end - t_start;
    double rate = 0.0;
    for (int s = 0; s <= 16; ++s)
        rate = std::max(rate, op.hamiltonian_at(t_start + span * s / 16.0).cwiseAbs().colwise().sum().maxCoeff());
    const double max_step = std::min(0.01, 0.01 / std::max(rate, 1e-300));
    const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step)));
    const double h = -span / steps;
    const cplx mi(0.0, -1.0);
    double t = t_end;
    for (int s = 0; s < steps; ++s) {
        const Eigen::MatrixXcd h0 = op.hamiltonian_at(t);
        const Eigen::MatrixXcd hm = op.hamiltonian_at(t + 0.5 * h);
        const Eigen::MatrixXcd h1 = op.hamiltonian_at(t + h);
        const Eigen::VectorXcd k1 = mi * (h0 * psi);
        const Eigen::VectorXcd k2 = mi * (hm * (psi + 0.5 * h * k1));
        const Eigen::VectorXcd k3 = mi * (hm * (psi + 0.5 * h * k2));
        const Eigen::VectorXcd k4 = mi * (h1 * (psi + h * k3));
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return psi;
}

}  // namespace

FloquetOperator::FloquetOperator(LevelSystem system, PulseSpec pulse, TimeGrid grid,
                                 RepresentationConfig representation,
                                 std::optional<AbsorberSetup> absorber, double time_offset,
                                 std::optional<SegmentTail> tail)
    : system_(std::move(system)),
      pulse_(pulse),
      grid_(grid),
      representation_(representation),
      time_offset_(time_offset),
      tail_(tail),
      transform_((grid.validate(), grid), static_cast<int>(system_.energies.size())) {
    system_.validate();
    representation_.validate();
    if (tail_) tail_->validate();
    const int n = n_states();
    const int N = grid_.n_modes;
    const double T = grid_.total_duration();
    lead_in_start_ = tail_ ? T - tail_->lead_in * grid_.absorbing_duration : T;
    const Representation mode = representation_.mode;
    if (mode != Representation::direct && system_.dipole.diagonal().cwiseAbs().maxCoeff() != 0.0)
        throw ConfigError("interaction-representation", "model.dipole",
                          "interaction representations require a zero-diagonal dipole matrix");

    diagonal_ = representation_diagonal(system_.energies, mode);
    keep_ = coupling_state_mask(system_.energies, representation_);
    dipole_ = system_.dipole;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!(keep_[i] && keep_[j])) dipole_(i, j) = 0.0;
    filtered_pairs_ = filtered_pair_count(system_.dipole, system_.energies, representation_);

    field_.resize(N);
    for (int k = 0; k < N; ++k) field_[k] = field(grid_.point(k));

    if (mode != Representation::direct) {
        phase_plus_.resize(n, N);
        phase_minus_.resize(n, N);
        for (int k = 0; k < N; ++k) {
            const Eigen::VectorXcd p = frame_phase(system_.energies, mode, frame_time(grid_.point(k)));
            for (int j = 0; j < n; ++j) {
                phase_plus_(j, k) = keep_[j] ? p[j] : 0.0;
                phase_minus_(j, k) = keep_[j] ? 1.0 / p[j] : 0.0;
            }
        }
    }

    absorber_values_ = Eigen::VectorXcd::Zero(N);
    absorber_columns_ = Eigen::MatrixXcd::Zero(n, N);
    if (absorber) {
        if (absorber->initial_state.size() != n)
            throw ConfigError("floquet-core", "initial_state", "length differs from the basis size");
        AbsorberEnvelope env = absorber->envelope;
        env.window_start = grid_.physical_duration;
        env.window_length = lead_in_start_ - grid_.physical_duration;
        env.validate();
        if (tail_) {
            target_ = propagate_backwards(*this, absorber->initial_state, T, lead_in_start_);
            const int l = dominant_component(absorber->initial_state);
            const double limit = std::log(tail_->max_target_growth);
            for (int j = 0; j < n; ++j) {
                const double growth = -(diagonal_[j] - diagonal_[l]).imag() * env.window_length;
                if (j != l && growth > limit && target_[j] != 0.0) {
                    dropped_weight_ += std::norm(target_[j]);
                    target_[j] = 0.0;
                    ++dropped_components_;
                }
            }
            absorber_ = ConstrainedAbsorber::comoving(env, target_, diagonal_, lead_in_start_, l);
        } else {
            target_ = absorber->initial_state;
            absorber_.emplace(env, absorber->initial_state, diagonal_);
        }
        for (int k = 0; k < N; ++k) {
            const double t = grid_.point(k);
            if (t >= grid_.physical_duration && t <= lead_in_start_) {
                absorber_values_[k] = evaluate_absorber(env, t);
                absorber_columns_.col(k) = absorber_->column(t);
            }
        }
    }

    lambda_.resize(N);
    lambda_transpose_.resize(N);
    for (int m = 0; m < N; ++m) {
        lambda_[m] = grid_.derivative_eigenvalue(grid_.mode_at(m));
        lambda_transpose_[m] = grid_.derivative_eigenvalue(grid_.mode_at((N - m) % N));
    }
}

double FloquetOperator::field(double t) const {
    const double L = grid_.physical_duration;
    if (t < 0.0) return 0.0;
    if (t <= L) return evaluate_pulse(pulse_, time_offset_ + t);
    if (!tail_) return 0.0;
    const double dT = grid_.absorbing_duration;
    const double taper = tail_->taper * dT;
    if (t < L + taper) return evaluate_pulse(pulse_, time_offset_ + t) * smooth_step(1.0 - (t - L) / taper);
    if (t >= lead_in_start_) {
        const double ramp = tail_->ramp * tail_->lead_in * dT;
        return evaluate_pulse(pulse_, time_offset_ + frame_time(t)) * smooth_step((t - lead_in_start_) / ramp);
    }
    return 0.0;
}

double FloquetOperator::frame_time(double t) const {
    return tail_ && t >= lead_in_start_ ? t - grid_.total_duration() : t;
}

Eigen::MatrixXcd FloquetOperator::hamiltonian_at(double t) const {
    const double f = field(t);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n_states(), n_states());
    if (f != 0.0) {
        if (representation_.mode == Representation::direct) {
            h = f * dipole_;
        } else {
            const Eigen::VectorXcd p = frame_phase(system_.energies, representation_.mode, frame_time(t));
            for (int j = 0; j < n_states(); ++j)
                for (int i = 0; i < n_states(); ++i)
                    if (keep_[i] && keep_[j] && dipole_(i, j) != 0.0) h(i, j) = f * p[i] * dipole_(i, j) / p[j];
        }
    }
    h.diagonal() += diagonal_;
    return h;
}

Eigen::MatrixXcd FloquetOperator::local_block(int k) const {
    const int n = n_states();
    Eigen::MatrixXcd m(n, n);
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, grid_.n_modes);
    Eigen::MatrixXcd out(n, grid_.n_modes);
    for (int j = 0; j < n; ++j) {
        e.setZero();
        e(j, k) = 1.0;
        apply_local(e, out);
        m.col(j) = out.col(k);
    }
    return m;
}

void FloquetOperator::apply_local(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
    const int N = grid_.n_modes;
    out = diagonal_.asDiagonal() * in;
    if (representation_.mode == Representation::direct) {
        const Eigen::MatrixXcd z = dipole_ * in;
        for (int k = 0; k < N; ++k)
            if (field_[k] != 0.0) out.col(k) += field_[k] * z.col(k);
    } else {
        const Eigen::MatrixXcd y = phase_minus_.cwiseProduct(in);
        const Eigen::MatrixXcd z = dipole_ * y;
        for (int k = 0; k < N; ++k)
            if (field_[k] != 0.0) out.col(k) += field_[k] * phase_plus_.col(k).cwiseProduct(z.col(k));
    }
    if (absorber_) absorber_->accumulate(absorber_values_, absorber_columns_, in, out);
}

void FloquetOperator::apply_local_transpose(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
    const int N = grid_.n_modes;
    out = diagonal_.asDiagonal() * in;
    if (representation_.mode == Representation::direct) {
        const Eigen::MatrixXcd z = dipole_.transpose() * in;
        for (int k = 0; k < N; ++k)
            if (field_[k] != 0.0) out.col(k) += field_[k] * z.col(k);
    } else {
        const Eigen::MatrixXcd y = phase_plus_.cwiseProduct(in);
        const Eigen::MatrixXcd z = dipole_.transpose() * y;
        for (int k = 0; k < N; ++k)
            if (field_[k] != 0.0) out.col(k) += field_[k] * phase_minus_.col(k).cwiseProduct(z.col(k));
    }
    if (absorber_) absorber_->accumulate_transpose(absorber_values_, absorber_columns_, in, out);
}

Eigen::MatrixXcd FloquetOperator::apply(const Eigen::MatrixXcd& v) const {
    if (v.rows() != n_states() || v.cols() != grid_.n_modes)
        throw Error("floquet-core", "extended vector shape mismatch");
    Eigen::MatrixXcd out, modes, back;
    apply_local(v, out);
    transform_.to_fbr(v, modes);
    modes = modes * lambda_.asDiagonal();
    transform_.to_dvr(modes, back);
    passes_ += 2;
    return out + back;
}

Eigen::MatrixXcd FloquetOperator::apply_transpose(const Eigen::MatrixXcd& v) const {
    if (v.rows() != n_states() || v.cols() != grid_.n_modes)
        throw Error("floquet-core", "extended vector shape mismatch");
    Eigen::MatrixXcd out, modes, back;
    apply_local_transpose(v, out);
    transform_.to_fbr(v, modes);
    modes = modes * lambda_transpose_.asDiagonal();
    transform_.to_dvr(modes, back);
    passes_ += 2;
    return out + back;
}

Eigen::MatrixXcd FloquetOperator::apply_fbr(const Eigen::MatrixXcd& x) const {
    if (x.rows() != n_states() || x.cols() != grid_.n_modes)
        throw Error("floquet-core", "extended vector shape mismatch");
    Eigen::MatrixXcd samples, local, out;
    transform_.to_dvr(x, samples);
    apply_local(samples, local);
    transform_.to_fbr(local, out);
    passes_ += 2;
    out += x * lambda_.asDiagonal();
    return out;
}

Eigen::MatrixXcd FloquetOperator::fbr_diagonal() const {
    const int n = n_states();
    const int N = grid_.n_modes;
    Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(n);
    for (int k = 0; k < N; ++k) {
        for (int j = 0; j < n; ++j) {
            cplx d = diagonal_[j] + field_[k] * dipole_(j, j);
            if (representation_.mode != Representation::direct)
                d = diagonal_[j] + field_[k] * dipole_(j, j) * phase_plus_(j, k) * phase_minus_(j, k);
            if (absorber_ && j != absorber_->pivot()) d += absorber_values_[k];
            mean[j] += d;
        }
    }
    mean /= static_cast<double>(N);
    Eigen::MatrixXcd diag(n, N);
    for (int m = 0; m < N; ++m) diag.col(m) = mean.array() + lambda_[m];
    return diag;
}

Eigen::MatrixXcd FloquetOperator::fbr_row(int pivot) const {
    const int n = n_states();
    const int N = grid_.n_modes;
    if (pivot < 0 || pivot >= n) throw Error("floquet-core", "pivot index out of range");
    Eigen::MatrixXcd unit = Eigen::MatrixXcd::Zero(n, N);
    unit.row(pivot).setOnes();
    Eigen::MatrixXcd rows, out;
    apply_local_transpose(unit, rows);
    transform_.raw_forward(rows, out);
    passes_ += 1;
    out /= static_cast<double>(N);
    out(pivot, 0) += lambda_[0];
    return out;
}

}  // namespace catm
