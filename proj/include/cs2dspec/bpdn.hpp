#pragma once

// Basis-pursuit denoising over the Fourier sensing operator:
//
//     minimize ||g||_1  subject to  ||F g - h||_2 <= eta
//
// solved by root finding on the Pareto curve phi(tau) = ||r(tau)||_2, where
// r(tau) is the residual of the one-norm constrained least-squares (LASSO)
// subproblem. Each LASSO subproblem is solved by spectral projected gradient
// with a non-monotone line search. ||g||_1 is the sum of complex moduli.

#include <cstddef>
#include <string>
#include <vector>

#include "cs2dspec/spectral_core.hpp"

namespace cs2d {

struct BpdnConfig {
    double eta = 1e-5;
    std::size_t max_outer_iterations = 100;
    std::size_t max_inner_iterations = 1000;
    /// Root accepted when | ||r|| - eta | <= pareto_tolerance * eta.
    double pareto_tolerance = 1e-2;
    /// Inner stop: projected-gradient sup-norm <= tol * ||F^H h||_inf, or
    /// relative duality gap <= tol.
    double optimality_tolerance = 1e-6;
    double step_min = 1e-10;
    double step_max = 1e10;
    /// Non-monotone line search memory.
    std::size_t line_search_window = 3;
    bool normalized = true;

    void validate() const;
};

enum class SolveStatus { Converged, BudgetExhausted, ResidualInfeasible };

std::string to_string(SolveStatus status);

/// One outer (Pareto) iteration.
struct ParetoPoint {
    double tau = 0.0;
    double residual_norm = 0.0;
    double one_norm = 0.0;
    double dual_norm = 0.0;
    std::size_t inner_iterations = 0;

    bool operator==(const ParetoPoint&) const = default;
};

struct BpdnResult {
    ComplexSeries coefficients;
    double residual_norm = 0.0;
    double one_norm = 0.0;
    std::size_t outer_iterations = 0;
    std::size_t inner_iterations = 0;
    SolveStatus status = SolveStatus::Converged;
    std::vector<ParetoPoint> trace;

    bool operator==(const BpdnResult&) const = default;
};

/// Euclidean projection onto { x : sum |x_j| <= radius }. Moduli are
/// soft-thresholded, phases kept.
ComplexSeries project_l1_ball(std::span<const Complex> v, double radius);

struct LassoResult {
    ComplexSeries coefficients;
    ComplexSeries residual;  // h - F g
    double dual_norm = 0.0;  // ||F^H r||_inf
    std::size_t iterations = 0;
    bool converged = false;
};

/// min ||F g - h||_2 s.t. ||g||_1 <= radius, started from warm_start.
LassoResult solve_lasso(const SensingOperator& op, std::span<const Complex> h, double radius,
                        std::span<const Complex> warm_start, const BpdnConfig& config);

/// BPDN on the operator as given (its own prefactor convention).
BpdnResult solve_bpdn(const SensingOperator& op, std::span<const Complex> h,
                      const BpdnConfig& config);

/// Normalized variant: solves with the unprefactored operator and h/||h||_2,
/// then rescales g by ||h||_2 / ((2/pi) dw). residual_norm stays that of the
/// normalized problem. `op` must be a normalized operator.
BpdnResult solve_bpdn_normalized(const SensingOperator& op, std::span<const Complex> h,
                                 const BpdnConfig& config);

}  // namespace cs2d
