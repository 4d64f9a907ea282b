#include "cs2dspec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cs2d {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform in (0, 1], 53 bits.
double unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

void check_band(double w, const TimeGrid& grid, const char* axis) {
    const double nyquist = std::numbers::pi / grid.delta();
    if (!(std::abs(w) < nyquist)) {
        throw std::invalid_argument(std::string("synthesize: ") + axis + " frequency " + std::to_string(w) +
                                    " outside the Nyquist band +-" + std::to_string(nyquist));
    }
}

}  // namespace

void ExponentialMode::validate() const {
    if (!std::isfinite(omega_tau) || !std::isfinite(omega_t))
        throw std::invalid_argument("ExponentialMode: non-finite frequency");
    if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag()))
        throw std::invalid_argument("ExponentialMode: non-finite amplitude");
    if (!(gamma_tau >= 0.0) || !(gamma_t >= 0.0) || !std::isfinite(gamma_tau) || !std::isfinite(gamma_t))
        throw std::invalid_argument("ExponentialMode: damping must be finite and nonnegative");
}

double gaussian_deviate(std::uint64_t seed, std::uint64_t index, unsigned component) {
    // Box-Muller on two uniforms keyed by (seed, index); component 0/1 take
    // the cosine/sine branch.
    const std::uint64_t key = splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL);
    const double u1 = unit_open(splitmix64(key));
    const double u2 = unit_open(splitmix64(key + 0x632BE59BD9B4E019ULL));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return component == 0 ? r * std::cos(a) : r * std::sin(a);
}

SignalGrid2D synthesize(const std::vector<ExponentialMode>& modes, const TimeGrid& tau_grid,
                        const TimeGrid& t_grid, double population_time, const NoiseSpec& noise,
                        SignalLabel label) {
    if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma))
        throw std::invalid_argument("synthesize: noise sigma must be finite and nonnegative");
    for (const auto& m : modes) {
        m.validate();
        check_band(m.omega_tau, tau_grid, "omega_tau");
        check_band(m.omega_t, t_grid, "omega_t");
    }

    SignalGrid2D out{tau_grid, t_grid, population_time, ComplexMatrix(tau_grid.count(), t_grid.count()), label};
    for (const auto& m : modes) {
        ComplexSeries along_t(t_grid.count());
        for (std::size_t b = 0; b < along_t.size(); ++b) {
            const double t = t_grid.time(b);
            along_t[b] = std::exp(Complex(-m.gamma_t * t, -m.omega_t * t));
        }
        for (std::size_t a = 0; a < tau_grid.count(); ++a) {
            const double tau = tau_grid.time(a);
            const Complex f = m.amplitude * std::exp(Complex(-m.gamma_tau * tau, -m.omega_tau * tau));
            auto row = out.values.row(a);
            for (std::size_t b = 0; b < row.size(); ++b) row[b] += f * along_t[b];
        }
    }

    if (noise.sigma > 0.0) {
        // each quadrature gets variance sigma^2 / 2
        const double s = noise.sigma / std::numbers::sqrt2;
        auto& data = out.values.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] += Complex(s * gaussian_deviate(noise.seed, i, 0), s * gaussian_deviate(noise.seed, i, 1));
        }
    }
    return out;
}

RbKind rb_kind_from_string(const std::string& s) {
    if (s == "sum" || s == "rb-sum") return RbKind::Sum;
    if (s == "diff" || s == "rb-diff") return RbKind::Diff;
    throw std::invalid_argument("unknown Rb preset kind '" + s + "' (expected sum|diff)");
}

std::vector<ExponentialMode> rb_preset(RbKind kind, double frame_frequency, double damping) {
    if (!std::isfinite(frame_frequency)) throw std::invalid_argument("rb_preset: non-finite frame frequency");
    if (!(damping >= 0.0)) throw std::invalid_argument("rb_preset: damping must be nonnegative");
    const double offsets[2] = {kRbLine1 - frame_frequency, kRbLine2 - frame_frequency};
    const double tau_sign = kind == RbKind::Sum ? 1.0 : -1.0;
    std::vector<ExponentialMode> modes;
    for (double wt : offsets)
        for (double wtau : offsets) modes.push_back({tau_sign * wtau, wt, {1.0, 0.0}, damping, damping});
    // ordered (v1,v1), (v1,v2), (v2,v1), (v2,v2) in (omega_tau, omega_t)
    std::sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) {
        return std::abs(a.omega_tau) != std::abs(b.omega_tau) ? std::abs(a.omega_tau) < std::abs(b.omega_tau)
                                                              : a.omega_t < b.omega_t;
    });
    return modes;
}

}  // namespace cs2d
