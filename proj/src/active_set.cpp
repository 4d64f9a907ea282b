#include "active_set.hpp"

#include "cs2dspec/bpdn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cs2d::detail {

namespace {

constexpr int kMaxNewton = 60;
constexpr int kMaxRounds = 10;
// A round that lowers the objective by less than this fraction ends the
// refinement; near-flat dual maxima otherwise keep trading tiny entries.
constexpr double kStallFraction = 1e-9;
constexpr std::size_t kGrowPerRound = 8;
// Entries below this fraction of the largest are left out of the starting
// pattern; SPG iterates carry a long tail of tiny entries.
constexpr double kSeedFraction = 1e-2;
constexpr double kResidualTolerance = 1e-12;
constexpr double kViolationSlack = 1e-9;

// Both axes are uniform, so (F^H F)(j, k) depends on j - k only.
class Gram {
public:
    explicit Gram(const SensingOperator& op) : n_(op.cols()), lags_(2 * op.cols() - 1) {
        const double dw = op.freq_grid().spacing();
        const double c2 = op.scale() * op.scale();
        for (std::size_t d = 0; d < lags_.size(); ++d) {
            const double lag = static_cast<double>(d) - static_cast<double>(n_ - 1);
            Complex acc{};
            for (std::size_t k = 0; k < op.rows(); ++k) {
                const double a = lag * dw * op.time_grid().time(k);
                acc += Complex(std::cos(a), -std::sin(a));
            }
            lags_[d] = c2 * acc;
        }
    }

    // sum_k conj(F(k, j)) F(k, l) = sum_k exp(i (w_j - w_l) t_k)
    Complex operator()(std::size_t j, std::size_t l) const { return std::conj(lags_[j + n_ - 1 - l]); }

private:
    std::size_t n_;
    std::vector<Complex> lags_;
};

struct Problem {
    const SensingOperator& op;
    std::span<const Complex> h;
    double radius;
    Gram gram;
    ComplexSeries rhs;  // F^H h
};

Eigen::MatrixXcd restricted_gram(const Problem& p, const std::vector<std::size_t>& support) {
    const auto s = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXcd g(s, s);
    for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b < s; ++b) g(a, b) = p.gram(support[a], support[b]);
    return g;
}

Eigen::VectorXcd restricted_rhs(const Problem& p, const std::vector<std::size_t>& support) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) v(static_cast<Eigen::Index>(i)) = p.rhs[support[i]];
    return v;
}

// Residual of the restricted KKT system: stationarity of each entry plus the
// active ball constraint.
Eigen::VectorXd kkt(const Eigen::MatrixXcd& gram, const Eigen::VectorXcd& rhs, const Eigen::VectorXcd& z,
                    double lambda, double radius) {
    const Eigen::Index s = z.size();
    Eigen::VectorXd out(2 * s + 1);
    const Eigen::VectorXcd grad = gram * z - rhs;
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < s; ++j) {
        const double mod = std::abs(z(j));
        const Complex f = grad(j) + lambda * z(j) / mod;
        out(2 * j) = f.real();
        out(2 * j + 1) = f.imag();
        l1 += mod;
    }
    out(2 * s) = l1 - radius;
    return out;
}

double estimate_multiplier(const Eigen::MatrixXcd& gram, const Eigen::VectorXcd& rhs, const Eigen::VectorXcd& z) {
    const Eigen::VectorXcd grad = gram * z - rhs;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) acc += -(std::conj(z(j) / std::abs(z(j))) * grad(j)).real();
    return std::max(acc / static_cast<double>(z.size()), 0.0);
}

// Solves the KKT system on `support`, dropping entries that cross zero.
// Updates support, z and lambda in place; false when the solve broke down.
bool newton_on_support(const Problem& p, std::vector<std::size_t>& support, Eigen::VectorXcd& z,
                       double& lambda) {
    if (support.empty()) return false;
    Eigen::MatrixXcd gram = restricted_gram(p, support);
    Eigen::VectorXcd rhs = restricted_rhs(p, support);

    // Constraint inactive: plain least squares on the pattern. Checked again
    // after every drop, since a smaller pattern may fit inside the ball.
    auto inside_ball = [&]() {
        if (support.size() > p.op.rows()) return false;
        Eigen::LDLT<Eigen::MatrixXcd> ldlt(gram);
        if (ldlt.info() != Eigen::Success) return false;
        const Eigen::VectorXcd ls = ldlt.solve(rhs);
        if (!(ls.allFinite() && ls.cwiseAbs().sum() <= p.radius &&
              (gram * ls - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm())))
            return false;
        z = ls;
        lambda = 0.0;
        return true;
    };
    if (inside_ball()) return true;

    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    for (int it = 0; it < kMaxNewton; ++it) {
        const Eigen::Index s = z.size();
        const Eigen::VectorXd res = kkt(gram, rhs, z, lambda, p.radius);
        if (!res.allFinite()) return false;
        if (res.cwiseAbs().maxCoeff() <= kResidualTolerance * scale) break;

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * s + 1, 2 * s + 1);
        for (Eigen::Index j = 0; j < s; ++j) {
            for (Eigen::Index k = 0; k < s; ++k) {
                const Complex mjk = gram(j, k);
                jac(2 * j, 2 * k) = mjk.real();
                jac(2 * j, 2 * k + 1) = -mjk.imag();
                jac(2 * j + 1, 2 * k) = mjk.imag();
                jac(2 * j + 1, 2 * k + 1) = mjk.real();
            }
            const double mod = std::abs(z(j));
            const double ur = z(j).real() / mod, ui = z(j).imag() / mod;
            const double w = lambda / mod;
            jac(2 * j, 2 * j) += w * (1.0 - ur * ur);
            jac(2 * j, 2 * j + 1) += -w * ur * ui;
            jac(2 * j + 1, 2 * j) += -w * ur * ui;
            jac(2 * j + 1, 2 * j + 1) += w * (1.0 - ui * ui);
            jac(2 * j, 2 * s) = ur;
            jac(2 * j + 1, 2 * s) = ui;
            jac(2 * s, 2 * j) = ur;
            jac(2 * s, 2 * j + 1) = ui;
        }
        Eigen::VectorXd step = jac.partialPivLu().solve(-res);
        if (!step.allFinite() || (jac * step + res).norm() > 1e-6 * res.norm())
            step = jac.colPivHouseholderQr().solve(-res);
        if (!step.allFinite()) return false;

        Eigen::VectorXcd dz(s);
        for (Eigen::Index j = 0; j < s; ++j) dz(j) = Complex(step(2 * j), step(2 * j + 1));

        // The entry whose full step goes furthest back through zero leaves
        // the pattern.
        Eigen::Index worst = -1;
        double worst_ratio = 0.0;
        for (Eigen::Index j = 0; j < s; ++j) {
            const Complex next = z(j) + dz(j);
            const double along = (std::conj(z(j)) * next).real() / std::norm(z(j));
            if (along <= worst_ratio) {
                worst = j;
                worst_ratio = along;
            }
        }
        if (worst >= 0) {
            if (s == 1) return false;
            support.erase(support.begin() + worst);
            Eigen::VectorXcd kept(s - 1);
            for (Eigen::Index j = 0, k = 0; j < s; ++j)
                if (j != worst) kept(k++) = z(j);
            z = kept;
            gram = restricted_gram(p, support);
            rhs = restricted_rhs(p, support);
            if (inside_ball()) return true;
            lambda = estimate_multiplier(gram, rhs, z);
            --it;  // drops are bounded by the pattern size, not the Newton budget
            continue;
        }

        const double merit = res.squaredNorm();
        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt, t *= 0.5) {
            const Eigen::VectorXcd z_try = z + t * dz;
            const double l_try = lambda + t * step(2 * s);
            const Eigen::VectorXd r_try = kkt(gram, rhs, z_try, l_try, p.radius);
            if (r_try.allFinite() && r_try.squaredNorm() < merit) {
                z = z_try;
                lambda = l_try;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    return lambda >= 0.0 && z.allFinite();
}

// Newton start at the least-squares solution of the pattern pulled onto the
// sphere. Used when a start rescaled from the SPG iterate converged to a
// stationary point of the sphere with a negative multiplier.
bool restart_from_least_squares(const Problem& p, const std::vector<std::size_t>& support, Eigen::VectorXcd& z,
                                double& lambda) {
    if (support.empty()) return false;
    const Eigen::MatrixXcd gram = restricted_gram(p, support);
    const Eigen::VectorXcd rhs = restricted_rhs(p, support);
    const Eigen::VectorXcd ls = gram.colPivHouseholderQr().solve(rhs);
    if (!ls.allFinite()) return false;
    const ComplexSeries pulled = project_l1_ball(std::span<const Complex>(ls.data(), static_cast<std::size_t>(ls.size())),
                                                 p.radius);
    for (Eigen::Index j = 0; j < ls.size(); ++j) z(j) = pulled[static_cast<std::size_t>(j)];
    // Entries zeroed by the projection have no phase; give them a tiny one
    // along the least-squares direction.
    for (Eigen::Index j = 0; j < z.size(); ++j)
        if (z(j) == Complex{}) z(j) = 1e-9 * p.radius * (ls(j) == Complex{} ? Complex(1.0) : ls(j) / std::abs(ls(j)));
    lambda = estimate_multiplier(gram, rhs, z);
    return true;
}

}  // namespace

std::optional<ComplexSeries> refine_active_set(const SensingOperator& op, std::span<const Complex> h,
                                               std::span<const Complex> x, double radius) {
    const std::size_t n = op.cols();
    const std::size_t cap = 2 * op.rows();

    const double big = norm_inf(x);
    if (!(big > 0.0)) return std::nullopt;
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < n; ++j)
        if (std::abs(x[j]) >= kSeedFraction * big) support.push_back(j);
    if (support.size() > op.rows()) {
        std::partial_sort(support.begin(), support.begin() + static_cast<std::ptrdiff_t>(op.rows()), support.end(),
                          [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });
        support.resize(op.rows());
    }
    std::sort(support.begin(), support.end());

    Problem p{op, h, radius, Gram(op), op.adjoint(h)};
    Eigen::VectorXcd z(static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) z(static_cast<Eigen::Index>(i)) = x[support[i]];
    // Rescale onto the sphere so the Newton start satisfies the constraint.
    if (const double l1 = z.cwiseAbs().sum(); l1 > 0.0) z *= radius / l1;

    auto embed = [&](const std::vector<std::size_t>& sup, const Eigen::VectorXcd& v) {
        ComplexSeries out(n, Complex{});
        for (std::size_t i = 0; i < sup.size(); ++i) out[sup[i]] = v(static_cast<Eigen::Index>(i));
        return out;
    };

    const double floor = 1e-13 * norm_inf(p.rhs);
    std::optional<ComplexSeries> best;
    double lambda = estimate_multiplier(restricted_gram(p, support), restricted_rhs(p, support), z);
    std::vector<double> corr(n);
    ComplexSeries r(op.rows()), c(n);
    double best_f = std::numeric_limits<double>::infinity();
    for (int round = 0; round < kMaxRounds; ++round) {
        if (!newton_on_support(p, support, z, lambda)) {
            z.conservativeResize(static_cast<Eigen::Index>(support.size()));
            if (!restart_from_least_squares(p, support, z, lambda) || !newton_on_support(p, support, z, lambda))
                break;
        }
        ComplexSeries cand = embed(support, z);
        op.apply(cand, r);
        for (std::size_t k = 0; k < r.size(); ++k) r[k] = h[k] - r[k];
        const double f = 0.5 * std::pow(norm2(r), 2);
        if (!(f < best_f)) break;
        const bool stalled = best_f - f <= kStallFraction * f;
        best = std::move(cand);
        best_f = f;
        if (stalled) break;
        op.adjoint(r, c);

        std::vector<std::size_t> violators;
        std::size_t next = 0;
        for (std::size_t j = 0; j < n; ++j) {
            corr[j] = std::abs(c[j]);
            while (next < support.size() && support[next] < j) ++next;
            const bool inside = next < support.size() && support[next] == j;
            if (!inside && corr[j] > lambda * (1.0 + kViolationSlack) + floor) violators.push_back(j);
        }
        // Neighbouring columns are nearly parallel; only local maxima of the
        // correlation are worth adding together.
        if (violators.size() > kGrowPerRound) {
            std::vector<std::size_t> peaks;
            for (std::size_t j : violators)
                if ((j == 0 || corr[j - 1] <= corr[j]) && (j + 1 == n || corr[j + 1] <= corr[j])) peaks.push_back(j);
            if (!peaks.empty()) violators = std::move(peaks);
        }
        if (violators.empty() || support.size() >= cap) break;

        const std::size_t grow = std::min({kGrowPerRound, violators.size(), cap - support.size()});
        std::partial_sort(violators.begin(), violators.begin() + static_cast<std::ptrdiff_t>(grow), violators.end(),
                          [&](std::size_t a, std::size_t b) { return corr[a] > corr[b]; });
        violators.resize(grow);

        // New entries start tiny, pointing along the correlation, with the
        // mass taken from the existing entries.
        const double seed = 1e-6 * radius / static_cast<double>(support.size() + grow);
        std::vector<std::size_t> merged(support.size() + grow);
        std::vector<std::size_t> added = violators;
        std::sort(added.begin(), added.end());
        std::merge(support.begin(), support.end(), added.begin(), added.end(), merged.begin());
        Eigen::VectorXcd grown(static_cast<Eigen::Index>(merged.size()));
        const double shrink = 1.0 - seed * static_cast<double>(grow) / std::max(z.cwiseAbs().sum(), seed);
        for (std::size_t i = 0, a = 0; i < merged.size(); ++i) {
            if (a < support.size() && support[a] == merged[i]) {
                grown(static_cast<Eigen::Index>(i)) = z(static_cast<Eigen::Index>(a++)) * shrink;
            } else {
                grown(static_cast<Eigen::Index>(i)) = seed * c[merged[i]] / corr[merged[i]];
            }
        }
        support = std::move(merged);
        z = std::move(grown);
    }
    return best;
}

}  // namespace cs2d::detail
