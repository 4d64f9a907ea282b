#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "cs2dspec/bpdn.hpp"
#include "oracles.hpp"

using namespace cs2d;

namespace {

SensingOperator full_operator(bool normalized = true) {
    const TimeGrid tg(26.687, 50);
    return SensingOperator(tg, make_frequency_grid(tg, 1000), normalized);
}

std::size_t argmax_modulus(const ComplexSeries& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    return best;
}

}  // namespace

TEST_CASE("projection hand examples") {
    const auto a = project_l1_ball(ComplexSeries{3.0, 1.0}, 2.0);
    CHECK(std::abs(a[0] - Complex(2.0, 0.0)) < 1e-15);
    CHECK(a[1] == Complex{});

    const auto b = project_l1_ball(ComplexSeries{{0.0, 3.0}, 1.0}, 2.0);
    CHECK(std::abs(b[0] - Complex(0.0, 2.0)) < 1e-15);
    CHECK(b[1] == Complex{});

    const ComplexSeries inside{{0.5, 0.5}, {-0.25, 0.0}};
    CHECK(project_l1_ball(inside, 2.0) == inside);
    CHECK(norm1(project_l1_ball(inside, 0.0)) == 0.0);
    CHECK_THROWS_AS(project_l1_ball(inside, -1.0), std::invalid_argument);
}

TEST_CASE("projection with tied moduli") {
    // four equal moduli, radius 2: threshold 0.5 on each
    const ComplexSeries v{1.0, {0.0, 1.0}, -1.0, {0.0, -1.0}};
    const auto p = project_l1_ball(v, 2.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(p[i] - 0.5 * v[i]) < 1e-15);
}

TEST_CASE("projection agrees with the sort oracle and is non-expansive") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> len(1, 32);
    std::uniform_real_distribution<double> rad(0.0, 10.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = len(rng);
        const auto v = oracle::random_series(rng, n, 2.0);
        const double radius = rad(rng);
        const auto p = project_l1_ball(v, radius);
        CHECK(oracle::max_abs_diff(p, oracle::project_l1(v, radius)) <= 1e-12 * std::max(1.0, norm_inf(v)));
        CHECK(norm1(p) <= radius + 1e-12);

        const auto w = oracle::random_series(rng, n, 2.0);
        const auto q = project_l1_ball(w, radius);
        ComplexSeries dp(n), dv(n);
        for (std::size_t i = 0; i < n; ++i) {
            dp[i] = p[i] - q[i];
            dv[i] = v[i] - w[i];
        }
        CHECK(norm2(dp) <= norm2(dv) + 1e-12);
    }
}

TEST_CASE("config validation") {
    BpdnConfig c;
    CHECK_NOTHROW(c.validate());
    c.eta = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.max_inner_iterations = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.step_min = 2.0;
    c.step_max = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.pareto_tolerance = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("lasso with zero radius returns zero and the data as residual") {
    const auto op = full_operator();
    std::mt19937_64 rng(1);
    const auto h = oracle::random_series(rng, 50);
    const auto res = solve_lasso(op, h, 0.0, ComplexSeries(1000), {});
    CHECK(norm1(res.coefficients) == 0.0);
    CHECK(res.residual == h);
}

TEST_CASE("lasso recovers a single unit spike at radius 1") {
    const auto op = full_operator();
    ComplexSeries g0(1000);
    g0[321] = std::polar(1.0, 0.7);
    const auto h = op.apply(g0);
    const auto res = solve_lasso(op, h, 1.0, ComplexSeries(1000), {});
    CHECK(norm1(res.coefficients) <= 1.0 * (1 + 1e-12));
    CHECK(oracle::rel_err(res.coefficients, g0) <= 1e-6);
    CHECK(res.dual_norm == doctest::Approx(norm_inf(op.adjoint(res.residual))));
}

TEST_CASE("lasso on a square system reaches the least-squares fit") {
    std::mt19937_64 rng(8);
    const TimeGrid tg(26.687, 16);
    const SensingOperator op(tg, make_frequency_grid(tg, 16), true);
    const auto h = oracle::random_series(rng, 16);

    const auto dense = op.dense();
    Eigen::MatrixXcd F(16, 16);
    Eigen::VectorXcd rhs(16);
    for (int k = 0; k < 16; ++k) {
        rhs(k) = h[k];
        for (int j = 0; j < 16; ++j) F(k, j) = dense(k, j);
    }
    const Eigen::VectorXcd g_ls = F.colPivHouseholderQr().solve(rhs);
    const double radius = g_ls.cwiseAbs().sum() * 1.01;

    const auto res = solve_lasso(op, h, radius, ComplexSeries(16), {});
    CHECK(norm2(res.residual) <= 1e-8);
}

TEST_CASE("bpdn on zero data and data inside the bound") {
    const auto op = full_operator();
    const auto zero = solve_bpdn(op, ComplexSeries(50), {});
    CHECK(zero.status == SolveStatus::Converged);
    CHECK(norm1(zero.coefficients) == 0.0);
    CHECK(norm1(solve_bpdn_normalized(op, ComplexSeries(50), {}).coefficients) == 0.0);

    BpdnConfig loose;
    loose.eta = 10.0;
    ComplexSeries h(50, Complex{0.1, 0.0});
    const auto inside = solve_bpdn(op, h, loose);
    CHECK(inside.status == SolveStatus::Converged);
    CHECK(norm1(inside.coefficients) == 0.0);
    CHECK(inside.residual_norm == doctest::Approx(norm2(h)));
    CHECK_THROWS_AS(solve_bpdn(op, ComplexSeries(49), {}), std::invalid_argument);
    CHECK_THROWS_AS(solve_bpdn_normalized(full_operator(false), h, {}), std::invalid_argument);
}

TEST_CASE("bpdn recovers three separated on-grid spikes") {
    const auto op = full_operator();
    std::mt19937_64 rng(99);
    BpdnConfig cfg;
    cfg.eta = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        ComplexSeries g0(1000);
        const auto bins = oracle::separated_bins(rng, 1000, 3, 20);
        for (auto b : bins) g0[b] = std::polar(1.0, 2.0 * trial + static_cast<double>(b));
        const auto res = solve_bpdn(op, op.apply(g0), cfg);
        CAPTURE(trial);
        CHECK(res.status == SolveStatus::Converged);
        CHECK(res.residual_norm <= cfg.eta * (1 + cfg.pareto_tolerance));
        CHECK(oracle::rel_err(res.coefficients, g0) <= 1e-3);
        const double floor = 1e-3 * norm_inf(res.coefficients);
        for (std::size_t j = 0; j < 1000; ++j) CHECK((std::abs(res.coefficients[j]) > floor) == (g0[j] != Complex{}));
    }
}

TEST_CASE("bpdn puts an off-grid line in the nearest bin") {
    const auto op = full_operator();
    const auto& fg = op.freq_grid();
    BpdnConfig cfg;
    cfg.eta = 1e-4;
    for (double pos : {250.3, 612.45, 700.8}) {
        const double w0 = fg.min() + pos * fg.spacing();
        ComplexSeries h(50);
        for (std::size_t k = 0; k < 50; ++k) h[k] = std::polar(1.0, -w0 * op.time_grid().time(k));
        const auto res = solve_bpdn_normalized(op, h, cfg);
        CAPTURE(pos);
        CHECK(argmax_modulus(res.coefficients) == fg.nearest_index(w0));
    }
}

TEST_CASE("normalized and unnormalized solves agree on support") {
    const auto op_n = full_operator(true);
    const auto op_u = full_operator(false);
    const double c = sensing_prefactor(op_n.freq_grid());
    ComplexSeries g0(1000);
    g0[100] = 2.0;
    g0[460] = Complex(0.0, -1.0);
    g0[900] = Complex(0.6, 0.8);
    const auto h = op_u.apply(g0);
    const double h_norm = norm2(h);

    BpdnConfig cfg;
    cfg.eta = 1e-6;
    const auto norm_res = solve_bpdn_normalized(op_n, h, cfg);
    BpdnConfig scaled = cfg;
    scaled.eta = cfg.eta * h_norm;
    const auto raw_res = solve_bpdn(op_u, h, scaled);
    REQUIRE(norm_res.status == SolveStatus::Converged);
    REQUIRE(raw_res.status == SolveStatus::Converged);
    for (std::size_t j = 0; j < 1000; ++j) {
        const bool a = std::abs(norm_res.coefficients[j]) > 1e-3 * norm_inf(norm_res.coefficients);
        const bool b = std::abs(raw_res.coefficients[j]) > 1e-3 * norm_inf(raw_res.coefficients);
        CHECK(a == b);
    }
    CHECK(oracle::rel_err(norm_res.coefficients, g0) <= 1e-3);
    CHECK(c > 0.0);
}

TEST_CASE("normalized solve rescales by ||h|| / prefactor") {
    // dt * n = 200 gives dw = pi / 100 and prefactor (2/pi) dw = 0.02
    const TimeGrid tg(25.0, 8);
    const SensingOperator op(tg, make_frequency_grid(tg, 8), true);
    REQUIRE(sensing_prefactor(op.freq_grid()) == doctest::Approx(0.02).epsilon(1e-14));

    ComplexSeries g0(8);
    g0[3] = 1.0;
    auto h = op.apply(g0);
    const double s = 5.0 / norm2(h);
    for (auto& z : h) z *= s;
    REQUIRE(norm2(h) == doctest::Approx(5.0).epsilon(1e-14));

    ComplexSeries unit(h);
    for (auto& z : unit) z /= 5.0;
    BpdnConfig cfg;
    cfg.eta = 1e-8;
    const auto inner = solve_bpdn(op, unit, cfg);
    const auto outer = solve_bpdn_normalized(op, h, cfg);
    REQUIRE(std::abs(inner.coefficients[3]) > 0.0);
    CHECK(std::abs(outer.coefficients[3] / inner.coefficients[3] - Complex(250.0, 0.0)) < 1e-6);
    // unit spike in the normalized problem -> 5 / 0.02
    CHECK(std::abs(inner.coefficients[3]) == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(1e-6));
    CHECK(std::abs(outer.coefficients[3]) == doctest::Approx(250.0 / std::sqrt(8.0)).epsilon(1e-6));
}

TEST_CASE("pareto trace is non-increasing and solves are deterministic") {
    const auto op = full_operator();
    std::mt19937_64 rng(4);
    ComplexSeries g0(1000);
    g0[210] = 1.0;
    g0[640] = Complex(0.3, 0.4);
    auto h = op.apply(g0);
    const auto noise = oracle::random_series(rng, 50, 1e-3);
    for (std::size_t k = 0; k < 50; ++k) h[k] += noise[k];

    BpdnConfig cfg;
    cfg.eta = 1e-2;
    const auto a = solve_bpdn(op, h, cfg);
    const auto b = solve_bpdn(op, h, cfg);
    CHECK(a == b);
    REQUIRE(a.trace.size() >= 2);
    for (std::size_t i = 1; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].residual_norm <= a.trace[i - 1].residual_norm * (1 + 10 * cfg.pareto_tolerance));
        CHECK(a.trace[i].tau > a.trace[i - 1].tau);
    }
    if (a.status == SolveStatus::Converged) CHECK(a.residual_norm <= cfg.eta * (1 + cfg.pareto_tolerance));
    CHECK(a.one_norm == norm1(a.coefficients));
}

TEST_CASE("budget exhaustion is reported, not thrown") {
    const auto op = full_operator();
    std::mt19937_64 rng(12);
    const auto h = oracle::random_series(rng, 50);
    BpdnConfig cfg;
    cfg.eta = 1e-9;
    cfg.max_inner_iterations = 5;
    const auto res = solve_bpdn(op, h, cfg);
    CHECK(res.status == SolveStatus::BudgetExhausted);
    CHECK(res.inner_iterations <= 5);
}
