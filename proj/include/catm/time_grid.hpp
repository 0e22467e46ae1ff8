#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>

#include "catm/fft.hpp"

namespace catm {

using cplx = std::complex<double>;

// Periodic extended time interval [0, T] with T = T0 + dT, sampled at t_i = i T / N.
// Fourier basis <t|n> = exp(-2 pi i n t / T) / sqrt(T), n = -N/2 .. N/2-1.
// Mode n is stored at index n mod N, so the Nyquist mode -N/2 sits at index N/2.
struct TimeGrid {
    int n_modes = 2048;
    double physical_duration = 0.0;   // T0
    double absorbing_duration = 0.0;  // dT

    double total_duration() const { return physical_duration + absorbing_duration; }
    double step() const { return total_duration() / n_modes; }
    double point(int i) const { return i * step(); }
    int mode_at(int index) const { return index < n_modes / 2 ? index : index - n_modes; }
    // Eigenvalue of -i d/dt on <t|n>.
    double derivative_eigenvalue(int mode) const;
    // Number of DVR points with t_i <= T0.
    int physical_points() const;

    // Throws ConfigError when N is not a power of two or durations are not positive.
    void validate() const;
};

// Unitary time-axis transforms for a single sample vector.
Eigen::VectorXcd dvr_to_fbr(const TimeGrid& grid, const Eigen::VectorXcd& samples);
Eigen::VectorXcd fbr_to_dvr(const TimeGrid& grid, const Eigen::VectorXcd& modes);
Eigen::VectorXcd apply_time_derivative(const TimeGrid& grid, const Eigen::VectorXcd& samples);

// Time-axis transforms over n_states x N extended arrays (column = time block).
class TimeAxisTransform {
public:
    TimeAxisTransform(const TimeGrid& grid, int n_states);

    const TimeGrid& grid() const { return grid_; }
    int n_states() const { return n_states_; }

    void to_fbr(const Eigen::MatrixXcd& dvr, Eigen::MatrixXcd& fbr) const;
    void to_dvr(const Eigen::MatrixXcd& fbr, Eigen::MatrixXcd& dvr) const;
    Eigen::MatrixXcd to_fbr(const Eigen::MatrixXcd& dvr) const;
    Eigen::MatrixXcd to_dvr(const Eigen::MatrixXcd& fbr) const;

    // Unnormalized forward DFT along time: out_m = sum_k in_k exp(-2 pi i m k / N).
    void raw_forward(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const;

private:
    TimeGrid grid_;
    int n_states_;
    std::shared_ptr<StridedFft> fft_;
};

// Band-limited interpolation of FBR coefficients (n_states x N) at an arbitrary time.
Eigen::VectorXcd interpolate_fbr(const TimeGrid& grid, const Eigen::MatrixXcd& fbr, double t);

}  // namespace catm
