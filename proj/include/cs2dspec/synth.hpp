#pragma once

// Synthetic time-domain 2D signals: sums of damped complex exponentials plus
// optional complex Gaussian noise.
//
//     S(tau, t) = sum_m A_m exp(-(i w_tau,m + g_tau,m) tau) exp(-(i w_t,m + g_t,m) t)
//
// The negative phase matches the sensing operator, so a mode at (w_tau, w_t)
// shows up at +w_tau, +w_t in both ft2d and cs2d.

#include <cstdint>
#include <string>
#include <vector>

#include "cs2dspec/spectral_core.hpp"

namespace cs2d {

struct ExponentialMode {
    double omega_tau = 0.0;  // rad/fs
    double omega_t = 0.0;    // rad/fs
    Complex amplitude{1.0, 0.0};
    double gamma_tau = 0.0;  // 1/fs
    double gamma_t = 0.0;    // 1/fs

    void validate() const;
};

struct NoiseSpec {
    double sigma = 0.0;  // std dev of the complex noise per sample
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument if a mode lies outside the Nyquist band of
/// either grid or fails validation.
SignalGrid2D synthesize(const std::vector<ExponentialMode>& modes, const TimeGrid& tau_grid,
                        const TimeGrid& t_grid, double population_time, const NoiseSpec& noise = {},
                        SignalLabel label = SignalLabel::Sum);

enum class RbKind { Sum, Diff };

RbKind rb_kind_from_string(const std::string& s);

constexpr double kRbLine1 = 2.370;        // rad/fs
constexpr double kRbLine2 = 2.414;        // rad/fs
constexpr double kRbFrame = 2.340;        // rad/fs
constexpr double kRbDamping = 1.0 / 2000.0;  // 1/fs

/// Four unit-amplitude modes at {v1, v2} x {v1, v2}, v_i = line_i - frame.
/// For Diff the omega_tau offsets are negated.
std::vector<ExponentialMode> rb_preset(RbKind kind, double frame_frequency = kRbFrame,
                                       double damping = kRbDamping);

/// Counter-based standard normal deviate for (seed, index, component).
double gaussian_deviate(std::uint64_t seed, std::uint64_t index, unsigned component);

}  // namespace cs2d
