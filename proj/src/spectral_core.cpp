#include "cs2dspec/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cs2d {

namespace {

// Plain complex product; avoids the C99 Annex G NaN recovery path that
// std::complex multiplication takes in the hot loops below.
inline Complex mul(Complex a, Complex b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline Complex mul_conj(Complex a, Complex b) {  // conj(a) * b
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

inline Complex phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

void require_length(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) +
                                    " does not match grid size " + std::to_string(want));
    }
}

}  // namespace

TimeGrid::TimeGrid(double delta, std::size_t count, long origin_index)
    : delta_(delta), count_(count), origin_index_(origin_index) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw std::invalid_argument("TimeGrid: delta must be positive and finite");
    }
    if (count < 1) {
        throw std::invalid_argument("TimeGrid: count must be at least 1");
    }
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> out(count_);
    for (std::size_t j = 0; j < count_; ++j) out[j] = time(j);
    return out;
}

FrequencyGrid::FrequencyGrid(double min, double max, std::size_t count)
    : min_(min), max_(max), count_(count) {
    if (count < 2) {
        throw std::invalid_argument("FrequencyGrid: count must be at least 2");
    }
    if (!std::isfinite(min) || !std::isfinite(max) || !(max > min)) {
        throw std::invalid_argument("FrequencyGrid: need finite min < max");
    }
    spacing_ = (max_ - min_) / static_cast<double>(count_ - 1);
}

std::vector<double> FrequencyGrid::frequencies() const {
    std::vector<double> out(count_);
    for (std::size_t j = 0; j < count_; ++j) out[j] = frequency(j);
    return out;
}

std::size_t FrequencyGrid::nearest_index(double w) const {
    const double x = std::round((w - min_) / spacing_);
    if (!(x > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(x), count_ - 1);
}

FrequencyGrid make_frequency_grid(const TimeGrid& time_grid, std::size_t n_omega,
                                  EndpointConvention convention) {
    if (n_omega < 2) {
        throw std::invalid_argument("make_frequency_grid: n_omega must be at least 2");
    }
    const double nyquist = std::numbers::pi / time_grid.delta();
    const double max = convention == EndpointConvention::Inclusive
                           ? nyquist
                           : nyquist * (1.0 - 2.0 / static_cast<double>(n_omega));
    return FrequencyGrid(-nyquist, max, n_omega);
}

ComplexSeries ComplexMatrix::column(std::size_t c) const {
    ComplexSeries out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void ComplexMatrix::set_column(std::size_t c, std::span<const Complex> values) {
    require_length(values.size(), rows_, "set_column");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

ComplexMatrix ComplexMatrix::transposed() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

bool ComplexMatrix::all_finite() const { return cs2d::all_finite(data_); }

std::string to_string(SignalLabel label) { return label == SignalLabel::Sum ? "sum" : "diff"; }
std::string to_string(Provenance provenance) { return provenance == Provenance::FT ? "ft" : "cs"; }

SignalLabel signal_label_from_string(const std::string& s) {
    if (s == "sum") return SignalLabel::Sum;
    if (s == "diff") return SignalLabel::Diff;
    throw std::invalid_argument("unknown signal label '" + s + "' (expected sum|diff)");
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "ft") return Provenance::FT;
    if (s == "cs") return Provenance::CS;
    throw std::invalid_argument("unknown provenance '" + s + "' (expected ft|cs)");
}

void SignalGrid2D::validate() const {
    if (values.rows() != tau_grid.count() || values.cols() != t_grid.count()) {
        throw std::invalid_argument("SignalGrid2D: matrix shape does not match grids");
    }
    if (!values.all_finite()) throw std::invalid_argument("SignalGrid2D: non-finite sample");
}

void Spectrum2D::validate() const {
    if (values.rows() != omega_tau_grid.count() || values.cols() != omega_t_grid.count()) {
        throw std::invalid_argument("Spectrum2D: matrix shape does not match grids");
    }
    if (!values.all_finite()) throw std::invalid_argument("Spectrum2D: non-finite value");
}

bool all_finite(std::span<const Complex> v) {
    return std::all_of(v.begin(), v.end(), [](Complex z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

double norm2(std::span<const Complex> v) {
    // scaled accumulation, safe for tiny and huge entries
    double scale = 0.0, ssq = 1.0;
    for (Complex z : v) {
        for (double x : {z.real(), z.imag()}) {
            if (x == 0.0) continue;
            const double a = std::abs(x);
            if (scale < a) {
                ssq = 1.0 + ssq * (scale / a) * (scale / a);
                scale = a;
            } else {
                ssq += (a / scale) * (a / scale);
            }
        }
    }
    return scale * std::sqrt(ssq);
}

double norm1(std::span<const Complex> v) {
    double s = 0.0;
    for (Complex z : v) s += std::abs(z);
    return s;
}

double norm_inf(std::span<const Complex> v) {
    double m = 0.0;
    for (Complex z : v) m = std::max(m, std::abs(z));
    return m;
}

Complex inner(std::span<const Complex> a, std::span<const Complex> b) {
    require_length(b.size(), a.size(), "inner");
    Complex s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += mul_conj(a[i], b[i]);
    return s;
}

ComplexSeries dft(std::span<const Complex> h, const TimeGrid& time_grid,
                  const FrequencyGrid& freq_grid) {
    require_length(h.size(), time_grid.count(), "dft");
    const auto t = time_grid.times();
    ComplexSeries g(freq_grid.count());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = freq_grid.frequency(k);
        Complex acc{};
        for (std::size_t j = 0; j < h.size(); ++j) acc += mul(phase(w * t[j]), h[j]);
        g[k] = time_grid.delta() * acc;
    }
    return g;
}

double sensing_prefactor(const FrequencyGrid& freq_grid) {
    return 2.0 / std::numbers::pi * freq_grid.spacing();
}

ComplexSeries apply_sensing(std::span<const Complex> g, const TimeGrid& time_grid,
                            const FrequencyGrid& freq_grid, bool normalized) {
    require_length(g.size(), freq_grid.count(), "apply_sensing");
    const double c = normalized ? 1.0 : sensing_prefactor(freq_grid);
    const auto w = freq_grid.frequencies();
    ComplexSeries out(time_grid.count());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double tk = time_grid.time(k);
        Complex acc{};
        for (std::size_t j = 0; j < g.size(); ++j) acc += mul(phase(-w[j] * tk), g[j]);
        out[k] = c * acc;
    }
    return out;
}

ComplexSeries apply_adjoint(std::span<const Complex> r, const TimeGrid& time_grid,
                            const FrequencyGrid& freq_grid, bool normalized) {
    require_length(r.size(), time_grid.count(), "apply_adjoint");
    const double c = normalized ? 1.0 : sensing_prefactor(freq_grid);
    const auto t = time_grid.times();
    ComplexSeries out(freq_grid.count());
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double wj = freq_grid.frequency(j);
        Complex acc{};
        for (std::size_t k = 0; k < r.size(); ++k) acc += mul_conj(phase(-wj * t[k]), r[k]);
        out[j] = c * acc;
    }
    return out;
}

SensingOperator::SensingOperator(TimeGrid time_grid, FrequencyGrid freq_grid, bool normalized)
    : time_grid_(time_grid),
      freq_grid_(freq_grid),
      normalized_(normalized),
      scale_(normalized ? 1.0 : sensing_prefactor(freq_grid)),
      cos_(time_grid.count() * freq_grid.count()),
      sin_(time_grid.count() * freq_grid.count()) {
    const auto w = freq_grid_.frequencies();
    for (std::size_t k = 0; k < rows(); ++k) {
        const double tk = time_grid_.time(k);
        for (std::size_t j = 0; j < cols(); ++j) {
            const Complex p = phase(-w[j] * tk);
            cos_[k * cols() + j] = p.real();
            sin_[k * cols() + j] = p.imag();
        }
    }
}

void SensingOperator::apply(std::span<const Complex> g, std::span<Complex> out) const {
    require_length(g.size(), cols(), "SensingOperator::apply");
    require_length(out.size(), rows(), "SensingOperator::apply output");

    // Iterates of the sparse solver are mostly zero; exact zeros contribute
    // nothing to the sums, so skipping them leaves the result unchanged.
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < g.size(); ++j)
        if (g[j] != Complex{}) support.push_back(j);
    const bool sparse = 2 * support.size() < g.size();

    for (std::size_t k = 0; k < rows(); ++k) {
        const double* pc = cos_.data() + k * cols();
        const double* ps = sin_.data() + k * cols();
        double re = 0.0, im = 0.0;
        if (sparse) {
            for (std::size_t j : support) {
                re += pc[j] * g[j].real() - ps[j] * g[j].imag();
                im += pc[j] * g[j].imag() + ps[j] * g[j].real();
            }
        } else {
            for (std::size_t j = 0; j < cols(); ++j) {
                re += pc[j] * g[j].real() - ps[j] * g[j].imag();
                im += pc[j] * g[j].imag() + ps[j] * g[j].real();
            }
        }
        out[k] = scale_ * Complex(re, im);
    }
}

void SensingOperator::adjoint(std::span<const Complex> r, std::span<Complex> out) const {
    require_length(r.size(), rows(), "SensingOperator::adjoint");
    require_length(out.size(), cols(), "SensingOperator::adjoint output");
    // split accumulators so the inner loop vectorizes
    thread_local std::vector<double> acc_re, acc_im;
    acc_re.assign(cols(), 0.0);
    acc_im.assign(cols(), 0.0);
    double* are = acc_re.data();
    double* aim = acc_im.data();
    for (std::size_t k = 0; k < rows(); ++k) {
        const double* pc = cos_.data() + k * cols();
        const double* ps = sin_.data() + k * cols();
        const double rr = r[k].real(), ri = r[k].imag();
        for (std::size_t j = 0; j < cols(); ++j) {
            are[j] += pc[j] * rr + ps[j] * ri;
            aim[j] += pc[j] * ri - ps[j] * rr;
        }
    }
    for (std::size_t j = 0; j < cols(); ++j) out[j] = scale_ * Complex(are[j], aim[j]);
}

ComplexSeries SensingOperator::apply(std::span<const Complex> g) const {
    ComplexSeries out(rows());
    apply(g, out);
    return out;
}

ComplexSeries SensingOperator::adjoint(std::span<const Complex> r) const {
    ComplexSeries out(cols());
    adjoint(r, out);
    return out;
}

ComplexMatrix SensingOperator::dense() const {
    ComplexMatrix m(rows(), cols());
    for (std::size_t i = 0; i < cos_.size(); ++i) m.data()[i] = scale_ * Complex(cos_[i], sin_[i]);
    return m;
}

}  // namespace cs2d
