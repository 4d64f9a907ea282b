#include <doctest.h>

#include <atomic>
#include <set>

#include "cs2dspec/pipeline.hpp"
#include "cs2dspec/synth.hpp"
#include "oracles.hpp"

using namespace cs2d;

namespace {

SignalGrid2D zero_signal(std::size_t n_tau, std::size_t n_t) {
    return {TimeGrid(26.687, n_tau), TimeGrid(26.687, n_t), 140.0, ComplexMatrix(n_tau, n_t), SignalLabel::Sum};
}

std::set<std::pair<std::size_t, std::size_t>> support(const ComplexMatrix& m, double rel) {
    double top = 0.0;
    for (auto z : m.data()) top = std::max(top, std::abs(z));
    std::set<std::pair<std::size_t, std::size_t>> s;
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (std::abs(m(r, c)) > rel * top) s.insert({r, c});
    return s;
}

BpdnConfig exact_config() {
    BpdnConfig c;
    c.eta = 1e-6;
    return c;
}

}  // namespace

TEST_CASE("parallel_for runs every index once and reports the lowest failure") {
    for (std::size_t workers : {1u, 3u, 8u}) {
        std::vector<std::atomic<int>> hits(100);
        parallel_for(100, workers, [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h.load() == 1);

        try {
            parallel_for(50, workers, [](std::size_t i) {
                if (i == 17 || i == 31) throw std::runtime_error(std::to_string(i));
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "17");
        }
    }
    CHECK(resolve_worker_count(0) >= 1);
    CHECK(resolve_worker_count(5) == 5);
}

TEST_CASE("zero signal gives zero half-transform and spectrum") {
    const auto s = zero_signal(51, 50);
    const auto [spec, report] = cs2d::cs2d(s, 1000, 1000, {}, {1});
    CHECK(spec.provenance == Provenance::CS);
    for (auto z : spec.values.data()) CHECK(z == Complex{});
    CHECK(report.first.records.size() == 51);
    CHECK(report.second.records.size() == 1000);
    CHECK(report.solve_count() == 1051);
    for (const auto& r : report.second.records) CHECK(r.trivial);
}

TEST_CASE("identical rows give identical single-bin rows") {
    const TimeGrid tau(26.687, 51), t(26.687, 50);
    const auto wt = make_frequency_grid(t, 1000);
    const ExponentialMode m{0.0, wt.frequency(640), {1.0, 0.0}, 0.0, 0.0};
    const auto s = synthesize({m}, tau, t, 0.0);
    const auto [half, report] = cs_pass_t(s, wt, exact_config(), 1);
    CHECK(report.records.size() == 51);
    for (std::size_t a = 0; a < 51; ++a) {
        const auto row = half.values.row(a);
        const double top = oracle::max_abs_diff(ComplexSeries(row.begin(), row.end()), ComplexSeries(1000));
        for (std::size_t j = 0; j < 1000; ++j) CHECK((std::abs(row[j]) > 1e-3 * top) == (j == 640));
        CHECK(report.records[a].status == SolveStatus::Converged);
    }
}

TEST_CASE("tau pass on a single on-grid column") {
    const TimeGrid tau(26.687, 51);
    const auto wtau = make_frequency_grid(tau, 1000);
    const auto wt = make_frequency_grid(TimeGrid(26.687, 50), 1000);
    HalfTransformed2D half{tau, wt, 0.0, ComplexMatrix(51, 1000)};
    for (std::size_t a = 0; a < 51; ++a) half.values(a, 123) = std::polar(2.0, -wtau.frequency(420) * tau.time(a));
    const auto [spec, report] = cs_pass_tau(half, wtau, exact_config(), 1);
    CHECK(report.records.size() == 1000);
    const auto nz = support(spec.values, 1e-3);
    REQUIRE(nz.size() == 1);
    CHECK(*nz.begin() == std::make_pair<std::size_t, std::size_t>(420, 123));
    // amplitude 2 in tau, undone by the normalized rescale
    CHECK(std::abs(spec.values(420, 123)) * sensing_prefactor(wtau) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("separable on-grid spikes: both axis orders recover the support") {
    const TimeGrid tau(20.0, 32), t(20.0, 32);
    const std::size_t n = 256;
    const auto wtau = make_frequency_grid(tau, n), wt = make_frequency_grid(t, n);
    const std::size_t tau_bins[2] = {60, 170}, t_bins[3] = {30, 110, 200};
    std::vector<ExponentialMode> modes;
    std::set<std::pair<std::size_t, std::size_t>> truth;
    for (auto a : tau_bins)
        for (auto b : t_bins) {
            modes.push_back({wtau.frequency(a), wt.frequency(b), {1.0, 0.0}, 0.0, 0.0});
            truth.insert({a, b});
        }
    // separable: (sum over tau modes) x (sum over t modes) uses all 6 products
    const auto s = synthesize(modes, tau, t, 0.0);
    for (auto order : {AxisOrder::TFirst, AxisOrder::TauFirst}) {
        const auto [spec, report] = cs2d::cs2d(s, n, n, exact_config(), {1, order});
        CAPTURE(to_string(order));
        CHECK(support(spec.values, 1e-3) == truth);
        CHECK(report.solve_count() == (order == AxisOrder::TFirst ? 32 + n : n + 32));
    }
}

TEST_CASE("cs2d is deterministic across runs and worker counts") {
    const TimeGrid tau(26.687, 12), t(26.687, 16);
    auto s = synthesize(rb_preset(RbKind::Sum), tau, t, 0.0, {1e-3, 5});
    BpdnConfig cfg;
    cfg.max_inner_iterations = 200;
    const auto a = cs2d::cs2d(s, 64, 64, cfg, {1}).first;
    const auto b = cs2d::cs2d(s, 64, 64, cfg, {1}).first;
    const auto c = cs2d::cs2d(s, 64, 64, cfg, {4}).first;
    CHECK(a.values == b.values);
    CHECK(a.values == c.values);
}

TEST_CASE("single tau sample does not break the pipeline") {
    const TimeGrid tau(26.687, 1), t(26.687, 50);
    const auto wt = make_frequency_grid(t, 200);
    const ExponentialMode m{0.0, wt.frequency(77), {1.0, 0.5}, 0.0, 1e-3};
    const auto s = synthesize({m}, tau, t, 0.0);
    const auto [spec, report] = cs2d::cs2d(s, 8, 200, {}, {1});
    CHECK(spec.values.all_finite());
    CHECK(spec.values.rows() == 8);
    CHECK(report.solve_count() == 1 + 200);

    const SensingOperator op(t, wt, true);
    const auto row = s.values.row(0);
    const auto direct = solve_bpdn_normalized(op, row, {});
    const auto [half, r1] = cs_pass_t(s, wt, {}, 1);
    const auto hrow = half.values.row(0);
    CHECK(ComplexSeries(hrow.begin(), hrow.end()) == direct.coefficients);
}

TEST_CASE("ft2d peak height and axis-order commutation") {
    const TimeGrid tau(26.687, 51), t(26.687, 50);
    const auto wtau = make_frequency_grid(tau, 1000), wt = make_frequency_grid(t, 1000);
    const ExponentialMode m{wtau.frequency(612), wt.frequency(805), {1.0, 0.0}, 0.0, 0.0};
    const auto s = synthesize({m}, tau, t, 0.0);
    const auto spec = ft2d(s, 1000, 1000);
    CHECK(spec.provenance == Provenance::FT);
    const double expect = 51 * 26.687 * 50 * 26.687;
    CHECK(std::abs(spec.values(612, 805)) == doctest::Approx(expect).epsilon(1e-9));

    std::mt19937_64 rng(2);
    SignalGrid2D noisy{TimeGrid(10.0, 9), TimeGrid(7.0, 13), 0.0, ComplexMatrix(9, 13), SignalLabel::Diff};
    noisy.values.data() = oracle::random_series(rng, 9 * 13);
    const auto a = ft2d(noisy, 40, 33, AxisOrder::TFirst);
    const auto b = ft2d(noisy, 40, 33, AxisOrder::TauFirst);
    CHECK(oracle::rel_err(a.values.data(), b.values.data()) <= 1e-12);

    CHECK(norm_inf(ft2d(zero_signal(5, 6), 16, 16).values.data()) == 0.0);

    // against the 1D transform applied along each axis
    ComplexMatrix half(9, 33);
    const auto w_t = make_frequency_grid(noisy.t_grid, 33);
    const auto w_tau = make_frequency_grid(noisy.tau_grid, 40);
    for (std::size_t r = 0; r < 9; ++r) {
        const auto row = noisy.values.row(r);
        const auto g = oracle::dft(ComplexSeries(row.begin(), row.end()), noisy.t_grid, w_t);
        for (std::size_t c = 0; c < 33; ++c) half(r, c) = g[c];
    }
    double worst = 0.0;
    for (std::size_t c = 0; c < 33; ++c) {
        const auto col = oracle::dft(half.column(c), noisy.tau_grid, w_tau);
        for (std::size_t r = 0; r < 40; ++r) worst = std::max(worst, std::abs(col[r] - a.values(r, c)) / norm_inf(col));
    }
    CHECK(worst <= 1e-12);
}
