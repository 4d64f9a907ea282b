#include "cs2dspec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cs2d {

namespace {

std::vector<double> magnitudes(const ComplexMatrix& m) {
    std::vector<double> out(m.data().size());
    std::transform(m.data().begin(), m.data().end(), out.begin(), [](Complex z) { return std::abs(z); });
    return out;
}

// Distance in bins from `peak` to the half-max crossing walking by `step`.
std::pair<double, bool> crossing(std::span<const double> p, std::size_t peak, double half, int step) {
    std::size_t prev = peak;
    while (true) {
        if ((step < 0 && prev == 0) || (step > 0 && prev + 1 == p.size())) {
            return {static_cast<double>(step > 0 ? prev - peak : peak - prev), true};
        }
        const std::size_t next = step > 0 ? prev + 1 : prev - 1;
        if (p[next] <= half) {
            const double frac = (p[prev] - half) / (p[prev] - p[next]);
            const double base = static_cast<double>(step > 0 ? prev - peak : peak - prev);
            return {base + frac, false};
        }
        prev = next;
    }
}

void check_same_grids(const Spectrum2D& a, const Spectrum2D& b) {
    if (!(a.omega_tau_grid == b.omega_tau_grid) || !(a.omega_t_grid == b.omega_t_grid))
        throw std::invalid_argument("compare_resolution: spectra are on different frequency grids");
}

}  // namespace

Width half_max_width(std::span<const double> profile, std::size_t peak, double spacing) {
    if (peak >= profile.size()) throw std::invalid_argument("half_max_width: peak index out of range");
    const double half = 0.5 * profile[peak];
    const bool left_above = peak > 0 && profile[peak - 1] >= half;
    const bool right_above = peak + 1 < profile.size() && profile[peak + 1] >= half;
    if (!left_above && !right_above) {
        return {spacing, true, false};
    }
    const auto [left, left_cut] = crossing(profile, peak, half, -1);
    const auto [right, right_cut] = crossing(profile, peak, half, +1);
    return {std::max(left + right, 1.0) * spacing, false, left_cut || right_cut};
}

std::pair<Width, Width> measure_fwhm(const Spectrum2D& spectrum, const Peak& peak) {
    const auto& v = spectrum.values;
    if (peak.row >= v.rows() || peak.col >= v.cols()) throw std::invalid_argument("measure_fwhm: peak outside spectrum");
    std::vector<double> along_tau(v.rows()), along_t(v.cols());
    for (std::size_t r = 0; r < v.rows(); ++r) along_tau[r] = std::abs(v(r, peak.col));
    for (std::size_t c = 0; c < v.cols(); ++c) along_t[c] = std::abs(v(peak.row, c));
    return {half_max_width(along_tau, peak.row, spectrum.omega_tau_grid.spacing()),
            half_max_width(along_t, peak.col, spectrum.omega_t_grid.spacing())};
}

std::vector<Peak> find_peaks(const Spectrum2D& spectrum, double threshold_fraction) {
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
        throw std::invalid_argument("find_peaks: threshold_fraction must lie in (0, 1)");
    const std::size_t rows = spectrum.values.rows(), cols = spectrum.values.cols();
    if (rows == 0 || cols == 0) throw std::invalid_argument("find_peaks: empty spectrum");
    const auto mag = magnitudes(spectrum.values);
    const double top = *std::max_element(mag.begin(), mag.end());
    std::vector<Peak> peaks;
    if (!(top > 0.0)) return peaks;
    const double floor = threshold_fraction * top;

    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double m = mag[r * cols + c];
            if (!(m > floor)) continue;
            bool is_max = true;
            for (int dr = -1; dr <= 1 && is_max; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
                    if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
                    if (mag[rr * cols + cc] >= m) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (!is_max) continue;
            Peak p;
            p.row = r;
            p.col = c;
            p.omega_tau = spectrum.omega_tau_grid.frequency(r);
            p.omega_t = spectrum.omega_t_grid.frequency(c);
            p.magnitude = m;
            const auto [wtau, wt] = measure_fwhm(spectrum, p);
            p.fwhm_tau = wtau.fwhm;
            p.single_bin_tau = wtau.single_bin;
            p.truncated_tau = wtau.truncated;
            p.fwhm_t = wt.fwhm;
            p.single_bin_t = wt.single_bin;
            p.truncated_t = wt.truncated;
            peaks.push_back(p);
        }
    }
    // grid order already gives the lexicographic tie-break
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
    return peaks;
}

ResolutionComparison compare_resolution(const Spectrum2D& ft, const Spectrum2D& cs, double matching_radius,
                                        double threshold_fraction) {
    check_same_grids(ft, cs);
    if (!(matching_radius >= 0.0)) throw std::invalid_argument("compare_resolution: negative matching radius");
    const auto ft_peaks = find_peaks(ft, threshold_fraction);
    const auto cs_peaks = find_peaks(cs, threshold_fraction);
    std::vector<bool> used(cs_peaks.size(), false);
    ResolutionComparison out;
    for (const Peak& f : ft_peaks) {
        std::size_t best = cs_peaks.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cs_peaks.size(); ++i) {
            if (used[i]) continue;
            const double d = std::hypot(cs_peaks[i].omega_tau - f.omega_tau, cs_peaks[i].omega_t - f.omega_t);
            if (d <= matching_radius && d < best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best == cs_peaks.size()) {
            out.unmatched_ft.push_back(f);
            continue;
        }
        used[best] = true;
        const Peak& c = cs_peaks[best];
        out.matched.push_back({f, c, f.fwhm_tau / c.fwhm_tau, f.fwhm_t / c.fwhm_t});
    }
    for (std::size_t i = 0; i < cs_peaks.size(); ++i)
        if (!used[i]) out.unmatched_cs.push_back(cs_peaks[i]);
    return out;
}

double default_matching_radius(const Spectrum2D& spectrum) {
    return kDefaultMatchingBins * std::max(spectrum.omega_tau_grid.spacing(), spectrum.omega_t_grid.spacing());
}

}  // namespace cs2d
