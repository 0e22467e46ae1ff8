#include "catm/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "catm/error.hpp"

namespace catm {

namespace {

// Integral of exp(-(s / w)^2) over [a, b].
double gaussian_integral(double a, double b, double w) {
    return 0.5 * std::sqrt(std::numbers::pi) * w * (std::erf(b / w) - std::erf(a / w));
}

}  // namespace

void PulseSpec::validate() const {
    if (!(duration > 0.0)) throw ConfigError("floquet-core", "time_grid.T0", "must be positive");
    if (!(width > 0.0)) throw ConfigError("floquet-core", "pulse.tau", "must be positive");
    if (plateau < 0.0) throw ConfigError("floquet-core", "pulse.plateau", "must be nonnegative");
    if (!std::isfinite(peak_amplitude) || !std::isfinite(carrier_frequency) || !std::isfinite(phase))
        throw ConfigError("floquet-core", "pulse", "non-finite parameter");
}

double evaluate_envelope(const PulseSpec& pulse, double t) {
    if (pulse.envelope == EnvelopeKind::gaussian) {
        const double u = (t - pulse.center) / pulse.width;
        return std::exp(-u * u);
    }
    const double lo = pulse.center - 0.5 * pulse.plateau;
    const double hi = pulse.center + 0.5 * pulse.plateau;
    double u = 0.0;
    if (t < lo) u = (t - lo) / pulse.width;
    if (t > hi) u = (t - hi) / pulse.width;
    return std::exp(-u * u);
}

double evaluate_pulse(const PulseSpec& pulse, double t) {
    if (t < 0.0 || t > pulse.duration) return 0.0;
    return pulse.peak_amplitude * evaluate_envelope(pulse, t) *
           std::cos(pulse.carrier_frequency * t + pulse.phase);
}

double envelope_edge_value(const PulseSpec& pulse) {
    return std::max(evaluate_envelope(pulse, 0.0), evaluate_envelope(pulse, pulse.duration));
}

double envelope_area(const PulseSpec& pulse, double t) {
    t = std::clamp(t, 0.0, pulse.duration);
    const double w = pulse.width;
    if (pulse.envelope == EnvelopeKind::gaussian)
        return pulse.peak_amplitude * gaussian_integral(-pulse.center, t - pulse.center, w);
    const double lo = pulse.center - 0.5 * pulse.plateau;
    const double hi = pulse.center + 0.5 * pulse.plateau;
    double area = 0.0;
    if (std::min(t, lo) > 0.0) area += gaussian_integral(-lo, std::min(t, lo) - lo, w);
    if (std::min(t, hi) > std::max(0.0, lo)) area += std::min(t, hi) - std::max(0.0, lo);
    if (t > std::max(0.0, hi)) area += gaussian_integral(std::max(0.0, hi) - hi, t - hi, w);
    return pulse.peak_amplitude * area;
}

}  // namespace catm
