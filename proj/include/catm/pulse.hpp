#pragma once

#include <complex>

namespace catm {

enum class EnvelopeKind { gaussian, gaussian_plateau };

// Laser pulse E(t) = E0 envelope(t) cos(omega t + phase) on [0, T0], zero elsewhere.
// gaussian:         envelope = exp(-((t - center) / width)^2)
// gaussian_plateau: unit plateau of length `plateau` centred on `center`, Gaussian rise and fall of width `width`.
struct PulseSpec {
    double peak_amplitude = 0.0;  // E0
    double carrier_frequency = 0.0;
    double phase = 0.0;
    EnvelopeKind envelope = EnvelopeKind::gaussian;
    double center = 0.0;
    double width = 1.0;
    double plateau = 0.0;
    double duration = 0.0;  // T0

    void validate() const;
};

double evaluate_envelope(const PulseSpec& pulse, double t);
double evaluate_pulse(const PulseSpec& pulse, double t);
// Largest envelope value at t = 0 or t = T0.
double envelope_edge_value(const PulseSpec& pulse);
// Integral of E0 envelope(s) over [0, t] (no carrier).
double envelope_area(const PulseSpec& pulse, double t);

}  // namespace catm
