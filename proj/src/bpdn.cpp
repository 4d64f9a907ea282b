#include "cs2dspec/bpdn.hpp"

#include "active_set.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace cs2d {

namespace {

constexpr double kArmijo = 1e-4;
constexpr std::size_t kMaxBacktracks = 40;
constexpr double kRootGapFraction = 1e-2;
// SPG iterations with an unchanged nonzero pattern before the pattern is
// handed to the active-set refinement.
constexpr std::size_t kStableSupport = 3;
// Relative objective agreement between successive refinements that ends a
// subproblem. Pareto steps need the residual norm to about a percent.
constexpr double kSettleFraction = 1e-4;

bool same_pattern(std::span<const Complex> a, std::span<const Complex> b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((a[i] == Complex{}) != (b[i] == Complex{})) return false;
    return true;
}

void check_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw NumericalFailure(std::string("non-finite ") + what);
}

double real_inner(std::span<const Complex> a, std::span<const Complex> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
}

void residual(const SensingOperator& op, std::span<const Complex> h, std::span<const Complex> x,
              ComplexSeries& r) {
    op.apply(x, r);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = h[k] - r[k];
}

// Gradient of 0.5 ||h - F x||^2 is -F^H r.
void gradient(const SensingOperator& op, std::span<const Complex> r, ComplexSeries& g) {
    op.adjoint(r, g);
    for (auto& z : g) z = -z;
}

// || P(x - g) - x ||_inf, the unit-step projected gradient.
double projected_gradient_norm(std::span<const Complex> x, std::span<const Complex> g, double radius,
                               ComplexSeries& scratch) {
    for (std::size_t i = 0; i < x.size(); ++i) scratch[i] = x[i] - g[i];
    const auto p = project_l1_ball(scratch, radius);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(p[i] - x[i]));
    return m;
}

// Reusable buffers for the subproblem iterations.
struct Workspace {
    ComplexSeries x, r, g, trial, x_new, r_new, g_new;
};

// SPG for the one-norm constrained least-squares subproblem. Stops once the
// duality gap is below optimality_tolerance * max(f, gap_floor), or below a
// fixed fraction of |f - root_target| (the subproblem then only needs to be
// accurate enough to place the next Pareto step; root_target < 0 disables),
// or the projected gradient is below optimality_tolerance * ||F^H h||_inf.
LassoResult spg_lasso(const SensingOperator& op, std::span<const Complex> h, double radius,
                      std::span<const Complex> warm_start, const BpdnConfig& config,
                      double dual_scale, double gap_floor, double root_target, std::size_t budget,
                      Workspace& ws) {
    const std::size_t n = op.cols();
    LassoResult out;

    if (radius == 0.0) {
        out.coefficients.assign(n, Complex{});
        out.residual.assign(h.begin(), h.end());
        out.dual_norm = dual_scale;
        out.converged = true;
        return out;
    }

    ws.x = project_l1_ball(warm_start, radius);
    ws.r.resize(op.rows());
    ws.g.resize(n);
    ws.trial.resize(n);
    ws.r_new.resize(op.rows());
    ws.g_new.resize(n);
    auto& x = ws.x;
    auto& r = ws.r;
    auto& g = ws.g;

    residual(op, h, x, r);
    gradient(op, r, g);
    double f = 0.5 * real_inner(r, r);
    check_finite(f, "objective");

    // Initial step from the projected gradient at unit length.
    double step;
    {
        for (std::size_t i = 0; i < n; ++i) ws.trial[i] = x[i] - g[i];
        const auto p = project_l1_ball(ws.trial, radius);
        double dx = 0.0;
        for (std::size_t i = 0; i < n; ++i) dx = std::max(dx, std::abs(p[i] - x[i]));
        step = dx < 1.0 / config.step_max ? config.step_max
                                          : std::clamp(1.0 / dx, config.step_min, config.step_max);
    }

    std::deque<double> history{f};
    double dual_norm = norm_inf(g);
    std::size_t stable = 0;
    std::size_t stable_wait = kStableSupport;  // doubled after every attempt
    ComplexSeries refined_pattern;
    double refined_f = std::numeric_limits<double>::infinity();
    // Set when two successive refinements agree on the objective to the
    // optimality tolerance. On oversampled grids the exact optimum has many
    // near-tied columns and the duality gap closes far slower than f settles.
    bool settled = false;

    // SPG identifies the pattern quickly but converges slowly on it when
    // neighbouring columns are nearly parallel (oversampled grids). Solve the
    // restricted problem exactly and keep the result if it lowers f.
    auto try_refine = [&]() {
        refined_pattern = x;
        stable_wait *= 2;
        auto cand = detail::refine_active_set(op, h, x, radius);
        if (!cand) return;
        ws.x_new = project_l1_ball(*cand, radius);
        residual(op, h, ws.x_new, ws.r_new);
        const double f_cand = 0.5 * real_inner(ws.r_new, ws.r_new);
        if (!(std::isfinite(f_cand) && f_cand < f)) return;
        settled = refined_f - f_cand <= kSettleFraction * f_cand;
        refined_f = f_cand;
        x.swap(ws.x_new);
        r.swap(ws.r_new);
        gradient(op, r, g);
        f = f_cand;
        dual_norm = norm_inf(g);
        history.assign(1, f);
        stable = 0;
    };
    if (norm1(x) > 0.0) try_refine();

    std::size_t iter = 0;
    for (;; ++iter) {
        const double gap = real_inner(r, r) - real_inner(r, h) + radius * dual_norm;
        const double slack = root_target < 0.0 ? 0.0 : kRootGapFraction * std::abs(f - root_target);
        if (settled || std::abs(gap) <= std::max(config.optimality_tolerance * std::max(f, gap_floor), slack) ||
            projected_gradient_norm(x, g, radius, ws.trial) <= config.optimality_tolerance * dual_scale) {
            out.converged = true;
            break;
        }
        if (iter >= budget) break;

        const double f_ref = *std::max_element(history.begin(), history.end());
        double alpha = step;
        double f_new = 0.0, descent = 0.0;
        bool accepted = false;
        for (std::size_t bt = 0; bt < kMaxBacktracks; ++bt) {
            for (std::size_t i = 0; i < n; ++i) ws.trial[i] = x[i] - alpha * g[i];
            ws.x_new = project_l1_ball(ws.trial, radius);
            residual(op, h, ws.x_new, ws.r_new);
            f_new = 0.5 * real_inner(ws.r_new, ws.r_new);
            check_finite(f_new, "objective");
            descent = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const Complex d = ws.x_new[i] - x[i];
                descent += g[i].real() * d.real() + g[i].imag() * d.imag();
            }
            if (f_new <= f_ref + kArmijo * descent) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        // No acceptable step along the projection arc: the iterate is as good
        // as floating point allows.
        if (!accepted || descent == 0.0) break;

        gradient(op, ws.r_new, ws.g_new);
        double sts = 0.0, sty = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Complex s = ws.x_new[i] - x[i];
            const Complex y = ws.g_new[i] - g[i];
            sts += std::norm(s);
            sty += s.real() * y.real() + s.imag() * y.imag();
        }
        step = sty <= 0.0 ? config.step_max : std::clamp(sts / sty, config.step_min, config.step_max);

        stable = same_pattern(x, ws.x_new) ? stable + 1 : 0;
        x.swap(ws.x_new);
        r.swap(ws.r_new);
        g.swap(ws.g_new);
        f = f_new;
        dual_norm = norm_inf(g);
        history.push_back(f);
        if (history.size() > config.line_search_window) history.pop_front();

        if (stable >= stable_wait && (refined_pattern.empty() || !same_pattern(x, refined_pattern)))
            try_refine();
    }

    out.coefficients = x;
    out.residual = r;
    out.dual_norm = dual_norm;
    out.iterations = iter;
    return out;
}

BpdnResult zero_solution(std::size_t n, double residual_norm) {
    BpdnResult res;
    res.coefficients.assign(n, Complex{});
    res.residual_norm = residual_norm;
    res.one_norm = 0.0;
    res.status = SolveStatus::Converged;
    return res;
}

}  // namespace

void BpdnConfig::validate() const {
    if (!(eta >= 0.0)) throw std::invalid_argument("BpdnConfig: eta must be nonnegative");
    if (max_outer_iterations < 1 || max_inner_iterations < 1)
        throw std::invalid_argument("BpdnConfig: iteration budgets must be at least 1");
    if (!(step_min > 0.0) || !(step_min <= step_max))
        throw std::invalid_argument("BpdnConfig: need 0 < step_min <= step_max");
    if (!(pareto_tolerance > 0.0)) throw std::invalid_argument("BpdnConfig: pareto_tolerance must be positive");
    if (!(optimality_tolerance > 0.0))
        throw std::invalid_argument("BpdnConfig: optimality_tolerance must be positive");
    if (line_search_window < 1) throw std::invalid_argument("BpdnConfig: line_search_window must be at least 1");
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::BudgetExhausted: return "budget-exhausted";
        case SolveStatus::ResidualInfeasible: return "residual-infeasible";
    }
    return "unknown";
}

LassoResult solve_lasso(const SensingOperator& op, std::span<const Complex> h, double radius,
                        std::span<const Complex> warm_start, const BpdnConfig& config) {
    config.validate();
    if (!(radius >= 0.0)) throw std::invalid_argument("solve_lasso: radius must be nonnegative");
    if (h.size() != op.rows()) throw std::invalid_argument("solve_lasso: h length does not match operator");
    if (warm_start.size() != op.cols())
        throw std::invalid_argument("solve_lasso: warm start length does not match operator");
    if (!all_finite(h)) throw std::invalid_argument("solve_lasso: non-finite h");

    const double dual_scale = norm_inf(op.adjoint(h));
    Workspace ws;
    return spg_lasso(op, h, radius, warm_start, config, dual_scale,
                     std::max(0.5 * config.eta * config.eta, std::numeric_limits<double>::min()), -1.0,
                     config.max_inner_iterations, ws);
}

BpdnResult solve_bpdn(const SensingOperator& op, std::span<const Complex> h, const BpdnConfig& config) {
    config.validate();
    if (h.size() != op.rows()) throw std::invalid_argument("solve_bpdn: h length does not match operator");
    if (!all_finite(h)) throw std::invalid_argument("solve_bpdn: non-finite h");

    const double eta = config.eta;
    const double h_norm = norm2(h);
    if (h_norm <= eta) return zero_solution(op.cols(), h_norm);

    const double dual_scale = norm_inf(op.adjoint(h));
    const double gap_floor = std::max(0.5 * eta * eta, std::numeric_limits<double>::min());

    BpdnResult res;
    res.status = SolveStatus::BudgetExhausted;
    Workspace ws;
    ComplexSeries x(op.cols(), Complex{});
    double tau = 0.0;
    double r_norm = h_norm;

    // Bracket on the Pareto curve: phi(lo) > eta, phi(hi) < eta. phi is convex
    // and decreasing, so exact Newton steps from the left never pass the root;
    // the bracket only catches overshoot caused by inexact subproblem solves.
    double lo_tau = 0.0, lo_r = h_norm;
    double hi_tau = std::numeric_limits<double>::infinity(), hi_r = 0.0;

    for (std::size_t outer = 0; outer < config.max_outer_iterations; ++outer) {
        // The SPG budget is shared by all subproblems of one solve.
        const std::size_t budget = config.max_inner_iterations - res.inner_iterations;
        LassoResult sub = spg_lasso(op, h, tau, x, config, dual_scale, gap_floor, 0.5 * eta * eta, budget, ws);
        x = std::move(sub.coefficients);
        r_norm = norm2(sub.residual);
        check_finite(r_norm, "residual norm");

        res.outer_iterations = outer + 1;
        res.inner_iterations += sub.iterations;
        res.trace.push_back({tau, r_norm, norm1(x), sub.dual_norm, sub.iterations});

        if (std::abs(r_norm - eta) <= config.pareto_tolerance * eta) {
            res.status = SolveStatus::Converged;
            break;
        }
        if (res.inner_iterations >= config.max_inner_iterations) break;

        double next;
        if (r_norm > eta) {
            // F^H r = 0 with r outside the bound: the residual lies outside
            // the range of F and no radius can reduce it.
            if (sub.dual_norm <= std::numeric_limits<double>::epsilon() * r_norm) {
                res.status = SolveStatus::ResidualInfeasible;
                break;
            }
            lo_tau = tau;
            lo_r = r_norm;
            next = tau + (r_norm - eta) * r_norm / sub.dual_norm;
        } else {
            // phi(||x||_1) <= ||r||, so the bracket closes at ||x||_1 when the
            // ball was not binding. Newton from the right lands left of the
            // root on a convex phi; a secant step from a fixed left end would
            // creep along the flat part past the exact-fit radius.
            hi_tau = std::min(tau, norm1(x));
            hi_r = r_norm;
            next = sub.dual_norm > 0.0 ? hi_tau + (r_norm - eta) * r_norm / sub.dual_norm : lo_tau;
            if (!(next > lo_tau && next < hi_tau)) next = lo_tau + (lo_r - eta) * (hi_tau - lo_tau) / (lo_r - hi_r);
        }
        if (std::isfinite(hi_tau) && !(next > lo_tau && next < hi_tau)) {
            next = 0.5 * (lo_tau + hi_tau);
        }
        if (next == tau) break;  // radius no longer resolvable in floating point
        tau = next;
        check_finite(tau, "radius");
    }

    res.coefficients = std::move(x);
    res.residual_norm = r_norm;
    res.one_norm = norm1(res.coefficients);
    return res;
}

BpdnResult solve_bpdn_normalized(const SensingOperator& op, std::span<const Complex> h,
                                 const BpdnConfig& config) {
    if (!op.normalized()) {
        throw std::invalid_argument("solve_bpdn_normalized: operator must omit the prefactor");
    }
    if (h.size() != op.rows()) {
        throw std::invalid_argument("solve_bpdn_normalized: h length does not match operator");
    }
    const double h_norm = norm2(h);
    if (h_norm == 0.0) return zero_solution(op.cols(), 0.0);

    // Also rotate the largest sample onto the positive real axis. The problem
    // is equivariant under a global phase, and fixing it makes inputs that
    // differ by a complex factor produce the same iterates.
    const auto peak = std::max_element(h.begin(), h.end(), [](Complex a, Complex b) { return std::abs(a) < std::abs(b); });
    const Complex rotation = std::conj(*peak) / std::abs(*peak);
    ComplexSeries unit(h.begin(), h.end());
    for (auto& z : unit) z = z * rotation / h_norm;

    BpdnResult res = solve_bpdn(op, unit, config);
    const Complex rescale = std::conj(rotation) * (h_norm / sensing_prefactor(op.freq_grid()));
    for (auto& z : res.coefficients) z *= rescale;
    res.one_norm = norm1(res.coefficients);
    return res;
}

}  // namespace cs2d
