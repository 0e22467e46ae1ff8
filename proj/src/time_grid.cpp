#include "catm/time_grid.hpp"

#include <cmath>
#include <numbers>

#include "catm/error.hpp"

namespace catm {

namespace {

bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

void check_length(const TimeGrid& grid, Eigen::Index len) {
    if (len != grid.n_modes) throw Error("time-grid", "sample length does not match N");
}

}  // namespace

double TimeGrid::derivative_eigenvalue(int mode) const {
    return -2.0 * std::numbers::pi * mode / total_duration();
}

int TimeGrid::physical_points() const {
    int count = 0;
    for (int i = 0; i < n_modes; ++i)
        if (point(i) <= physical_duration * (1.0 + 1e-14)) ++count;
    return count;
}

void TimeGrid::validate() const {
    if (!is_power_of_two(n_modes) || n_modes < 2)
        throw ConfigError("time-grid", "time_grid.n_modes", "must be a power of two >= 2");
    if (!(physical_duration > 0.0))
        throw ConfigError("time-grid", "time_grid.T0", "physical duration must be positive");
    if (!(absorbing_duration > 0.0))
        throw ConfigError("time-grid", "time_grid.dT", "absorbing tail must be positive");
}

Eigen::VectorXcd dvr_to_fbr(const TimeGrid& grid, const Eigen::VectorXcd& samples) {
    check_length(grid, samples.size());
    TimeAxisTransform tr(grid, 1);
    Eigen::MatrixXcd in = samples.transpose();
    return tr.to_fbr(in).transpose();
}

Eigen::VectorXcd fbr_to_dvr(const TimeGrid& grid, const Eigen::VectorXcd& modes) {
    check_length(grid, modes.size());
    TimeAxisTransform tr(grid, 1);
    Eigen::MatrixXcd in = modes.transpose();
    return tr.to_dvr(in).transpose();
}

Eigen::VectorXcd apply_time_derivative(const TimeGrid& grid, const Eigen::VectorXcd& samples) {
    Eigen::VectorXcd d = dvr_to_fbr(grid, samples);
    for (int m = 0; m < grid.n_modes; ++m) d[m] *= grid.derivative_eigenvalue(grid.mode_at(m));
    return fbr_to_dvr(grid, d);
}

TimeAxisTransform::TimeAxisTransform(const TimeGrid& grid, int n_states)
    : grid_(grid), n_states_(n_states), fft_(std::make_shared<StridedFft>(grid.n_modes, n_states)) {}

void TimeAxisTransform::to_fbr(const Eigen::MatrixXcd& dvr, Eigen::MatrixXcd& fbr) const {
    fbr.resize(n_states_, grid_.n_modes);
    fft_->backward(dvr.data(), fbr.data());
    fbr *= 1.0 / std::sqrt(static_cast<double>(grid_.n_modes));
}

void TimeAxisTransform::to_dvr(const Eigen::MatrixXcd& fbr, Eigen::MatrixXcd& dvr) const {
    dvr.resize(n_states_, grid_.n_modes);
    fft_->forward(fbr.data(), dvr.data());
    dvr *= 1.0 / std::sqrt(static_cast<double>(grid_.n_modes));
}

Eigen::MatrixXcd TimeAxisTransform::to_fbr(const Eigen::MatrixXcd& dvr) const {
    if (dvr.rows() != n_states_ || dvr.cols() != grid_.n_modes)
        throw Error("time-grid", "extended array shape mismatch");
    Eigen::MatrixXcd out;
    to_fbr(dvr, out);
    return out;
}

Eigen::MatrixXcd TimeAxisTransform::to_dvr(const Eigen::MatrixXcd& fbr) const {
    if (fbr.rows() != n_states_ || fbr.cols() != grid_.n_modes)
        throw Error("time-grid", "extended array shape mismatch");
    Eigen::MatrixXcd out;
    to_dvr(fbr, out);
    return out;
}

void TimeAxisTransform::raw_forward(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
    out.resize(n_states_, grid_.n_modes);
    fft_->forward(in.data(), out.data());
}

Eigen::VectorXcd interpolate_fbr(const TimeGrid& grid, const Eigen::MatrixXcd& fbr, double t) {
    if (fbr.cols() != grid.n_modes) throw Error("time-grid", "extended array shape mismatch");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(fbr.rows());
    const double scale = 1.0 / std::sqrt(static_cast<double>(grid.n_modes));
    const double phase_unit = -2.0 * std::numbers::pi * t / grid.total_duration();
    for (int m = 0; m < grid.n_modes; ++m) {
        const cplx basis = std::polar(scale, phase_unit * grid.mode_at(m));
        out += basis * fbr.col(m);
    }
    return out;
}

}  // namespace catm
