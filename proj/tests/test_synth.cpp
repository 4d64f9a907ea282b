#include <doctest.h>

#include <numbers>

#include "cs2dspec/pipeline.hpp"
#include "cs2dspec/synth.hpp"

using namespace cs2d;

TEST_CASE("empty mode list gives a zero grid") {
    const auto s = synthesize({}, TimeGrid(26.687, 5), TimeGrid(26.687, 4), 140.0);
    CHECK(s.values == ComplexMatrix(5, 4));
    CHECK(s.population_time == 140.0);
}

TEST_CASE("single undamped mode evaluates the closed form") {
    const double dtau = 26.687, dt = 20.0;
    const ExponentialMode m{0.05, -0.03, {1.0, 0.0}, 0.0, 0.0};
    const auto s = synthesize({m}, TimeGrid(dtau, 3), TimeGrid(dt, 3), 0.0);
    const Complex expect = std::exp(Complex(0.0, -(0.05 * dtau + -0.03 * dt)));
    CHECK(std::abs(s.values(1, 1) - expect) < 1e-15);
    CHECK(s.values(0, 0) == Complex(1.0, 0.0));
}

TEST_CASE("opposite amplitudes cancel") {
    const ExponentialMode a{0.02, 0.04, {0.5, -1.5}, 1e-3, 2e-3};
    ExponentialMode b = a;
    b.amplitude = -a.amplitude;
    const auto s = synthesize({a, b}, TimeGrid(26.687, 6), TimeGrid(26.687, 7), 0.0);
    for (auto z : s.values.data()) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("noiseless synthesis matches a per-sample evaluation") {
    // Four-mode sums cancel to ~1e-3 at some samples, so the error is taken
    // normwise over the grid; a single mode is also checked sample by sample.
    auto reference = [](const std::vector<ExponentialMode>& modes, const TimeGrid& tau, const TimeGrid& t,
                        std::size_t a, std::size_t b) {
        Complex v{};
        for (auto it = modes.rbegin(); it != modes.rend(); ++it) {
            const double x = -it->gamma_tau * tau.time(a) - it->gamma_t * t.time(b);
            const double ph = -it->omega_tau * tau.time(a) - it->omega_t * t.time(b);
            v += it->amplitude * std::exp(x) * Complex(std::cos(ph), std::sin(ph));
        }
        return v;
    };
    const TimeGrid tau(26.687, 51), t(26.687, 50, 1);

    const auto modes = rb_preset(RbKind::Diff);
    const auto s = synthesize(modes, tau, t, 0.0);
    double num = 0.0, den = 0.0;
    for (std::size_t a = 0; a < 51; ++a)
        for (std::size_t b = 0; b < 50; ++b) {
            const Complex v = reference(modes, tau, t, a, b);
            num += std::norm(s.values(a, b) - v);
            den += std::norm(v);
        }
    CHECK(std::sqrt(num / den) <= 1e-13);

    const std::vector<ExponentialMode> one{{-0.05, 0.09, {0.3, -1.2}, 4e-4, 7e-4}};
    const auto s1 = synthesize(one, tau, t, 0.0);
    double worst = 0.0;
    for (std::size_t a = 0; a < 51; ++a)
        for (std::size_t b = 0; b < 50; ++b) {
            const Complex v = reference(one, tau, t, a, b);
            worst = std::max(worst, std::abs(s1.values(a, b) - v) / std::abs(v));
        }
    CHECK(worst <= 1e-13);
}

TEST_CASE("noise is reproducible and has the requested variance") {
    const TimeGrid g(26.687, 64);
    const auto a = synthesize({}, g, g, 0.0, {0.5, 42});
    const auto b = synthesize({}, g, g, 0.0, {0.5, 42});
    const auto c = synthesize({}, g, g, 0.0, {0.5, 43});
    CHECK(a.values == b.values);
    CHECK(!(a.values == c.values));
    double power = 0.0, re = 0.0;
    for (auto z : a.values.data()) {
        power += std::norm(z);
        re += z.real() * z.real();
    }
    const double n = static_cast<double>(a.values.data().size());
    CHECK(power / n == doctest::Approx(0.25).epsilon(0.05));
    CHECK(re / n == doctest::Approx(0.125).epsilon(0.07));
    CHECK_THROWS_AS(synthesize({}, g, g, 0.0, {-1.0, 0}), std::invalid_argument);
}

TEST_CASE("rb preset offsets and signs") {
    const auto sum = rb_preset(RbKind::Sum);
    REQUIRE(sum.size() == 4);
    const double v1 = 2.370 - 2.340, v2 = 2.414 - 2.340;
    CHECK(v1 == doctest::Approx(0.030));
    CHECK(v2 == doctest::Approx(0.074));
    const double expect[4][2] = {{v1, v1}, {v1, v2}, {v2, v1}, {v2, v2}};
    for (int i = 0; i < 4; ++i) {
        CHECK(sum[i].omega_tau == doctest::Approx(expect[i][0]));
        CHECK(sum[i].omega_t == doctest::Approx(expect[i][1]));
        CHECK(sum[i].amplitude == Complex(1.0, 0.0));
        CHECK(sum[i].gamma_tau == doctest::Approx(1.0 / 2000.0));
    }
    const auto diff = rb_preset(RbKind::Diff);
    for (int i = 0; i < 4; ++i) {
        CHECK(diff[i].omega_tau == -sum[i].omega_tau);
        CHECK(diff[i].omega_t == sum[i].omega_t);
    }
    CHECK(std::max(v1, v2) < std::numbers::pi / 26.687);
}

TEST_CASE("modes outside the Nyquist band are rejected") {
    const TimeGrid g(26.687, 10);
    CHECK_THROWS_AS(synthesize(rb_preset(RbKind::Sum, 2.2), g, g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(synthesize(rb_preset(RbKind::Sum, 0.0), g, g, 0.0), std::invalid_argument);
    ExponentialMode bad{0.0, 0.0, {1.0, 0.0}, -1.0, 0.0};
    CHECK_THROWS_AS(synthesize({bad}, g, g, 0.0), std::invalid_argument);
}

TEST_CASE("ft2d of a single on-grid mode peaks at its bin") {
    const TimeGrid tau(26.687, 51), t(26.687, 50);
    const auto wt = make_frequency_grid(t, 1000), wtau = make_frequency_grid(tau, 1000);
    const ExponentialMode m{wtau.frequency(700), wt.frequency(300), {1.0, 0.0}, 0.0, 0.0};
    const auto spec = ft2d(synthesize({m}, tau, t, 0.0), 1000, 1000);
    std::size_t best = 0;
    const auto& d = spec.values.data();
    for (std::size_t i = 1; i < d.size(); ++i)
        if (std::abs(d[i]) > std::abs(d[best])) best = i;
    CHECK(best / 1000 == 700);
    CHECK(best % 1000 == 300);
}
