#pragma once

// Sampling grids, complex containers and the Fourier operators shared by the
// FT baseline and the sparse-recovery solver.
//
// Sign conventions:
//   forward transform   g_k = sum_j dt * exp(+i w_k t_j) * h_j
//   sensing operator    (F g)_k = c * sum_j exp(-i w_j t_k) * g_j,
//                       c = (2/pi) dw, or 1 when normalized
// so a time signal exp(-i w0 t) maps to a spectral feature at +w0 under both.

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cs2d {

using Complex = std::complex<double>;
using ComplexSeries = std::vector<Complex>;

/// Raised when a numerical routine produces a non-finite intermediate.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform time axis, t_j = delta * (origin_index + j), j = 0..count-1.
class TimeGrid {
public:
    TimeGrid(double delta, std::size_t count, long origin_index = 0);

    double delta() const { return delta_; }
    std::size_t count() const { return count_; }
    long origin_index() const { return origin_index_; }

    double time(std::size_t j) const {
        return delta_ * static_cast<double>(origin_index_ + static_cast<long>(j));
    }
    std::vector<double> times() const;

    bool operator==(const TimeGrid&) const = default;

private:
    double delta_;
    std::size_t count_;
    long origin_index_;
};

enum class EndpointConvention {
    Exclusive,  // [-pi/dt, +pi/dt), standard DFT bin layout
    Inclusive   // [-pi/dt, +pi/dt]
};

/// Uniform frequency axis in rad/fs. spacing == (max - min) / (count - 1)
/// holds bit-exactly; w_j is always evaluated as min + j * spacing.
class FrequencyGrid {
public:
    FrequencyGrid(double min, double max, std::size_t count);

    double min() const { return min_; }
    double max() const { return max_; }
    double spacing() const { return spacing_; }
    std::size_t count() const { return count_; }

    double frequency(std::size_t j) const { return min_ + static_cast<double>(j) * spacing_; }
    std::vector<double> frequencies() const;

    /// Index of the grid point closest to w (clamped to the grid).
    std::size_t nearest_index(double w) const;

    bool operator==(const FrequencyGrid&) const = default;

private:
    double min_;
    double max_;
    double spacing_;
    std::size_t count_;
};

FrequencyGrid make_frequency_grid(const TimeGrid& time_grid, std::size_t n_omega,
                                  EndpointConvention convention = EndpointConvention::Exclusive);

/// Row-major complex matrix.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols, Complex fill = {})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<Complex> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const Complex> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    ComplexSeries column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const Complex> values);
    ComplexMatrix transposed() const;

    const std::vector<Complex>& data() const { return data_; }
    std::vector<Complex>& data() { return data_; }

    bool all_finite() const;
    bool operator==(const ComplexMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

enum class SignalLabel { Sum, Diff };
enum class Provenance { FT, CS };

std::string to_string(SignalLabel label);
std::string to_string(Provenance provenance);
SignalLabel signal_label_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

/// Time-domain data S(tau, T, t) for one population time; rows are tau,
/// columns are t.
struct SignalGrid2D {
    TimeGrid tau_grid;
    TimeGrid t_grid;
    double population_time = 0.0;
    ComplexMatrix values;
    SignalLabel label = SignalLabel::Sum;

    void validate() const;
    bool operator==(const SignalGrid2D&) const = default;
};

/// Frequency-domain data S(w_tau, T, w_t); rows are w_tau, columns are w_t.
struct Spectrum2D {
    FrequencyGrid omega_tau_grid;
    FrequencyGrid omega_t_grid;
    double population_time = 0.0;
    ComplexMatrix values;
    Provenance provenance = Provenance::FT;

    void validate() const;
    bool operator==(const Spectrum2D&) const = default;
};

bool all_finite(std::span<const Complex> v);
double norm2(std::span<const Complex> v);
double norm1(std::span<const Complex> v);
double norm_inf(std::span<const Complex> v);
/// <a, b> = sum conj(a_i) b_i
Complex inner(std::span<const Complex> a, std::span<const Complex> b);

// Direct-sum operators. Each call evaluates its phases afresh.

ComplexSeries dft(std::span<const Complex> h, const TimeGrid& time_grid,
                  const FrequencyGrid& freq_grid);

ComplexSeries apply_sensing(std::span<const Complex> g, const TimeGrid& time_grid,
                            const FrequencyGrid& freq_grid, bool normalized);

ComplexSeries apply_adjoint(std::span<const Complex> r, const TimeGrid& time_grid,
                            const FrequencyGrid& freq_grid, bool normalized);

/// (2/pi) * dw, the prefactor of the sensing matrix.
double sensing_prefactor(const FrequencyGrid& freq_grid);

/// The sensing operator F (frequency -> time) with its phase table cached, for
/// repeated application inside iterative solvers. Produces the same values,
/// bit for bit, as apply_sensing / apply_adjoint.
class SensingOperator {
public:
    SensingOperator(TimeGrid time_grid, FrequencyGrid freq_grid, bool normalized);

    std::size_t rows() const { return time_grid_.count(); }
    std::size_t cols() const { return freq_grid_.count(); }
    const TimeGrid& time_grid() const { return time_grid_; }
    const FrequencyGrid& freq_grid() const { return freq_grid_; }
    bool normalized() const { return normalized_; }
    double scale() const { return scale_; }

    void apply(std::span<const Complex> g, std::span<Complex> out) const;
    void adjoint(std::span<const Complex> r, std::span<Complex> out) const;

    ComplexSeries apply(std::span<const Complex> g) const;
    ComplexSeries adjoint(std::span<const Complex> r) const;

    /// Single matrix entry F(k, j), prefactor included.
    Complex entry(std::size_t k, std::size_t j) const {
        const std::size_t i = k * cols() + j;
        return scale_ * Complex(cos_[i], sin_[i]);
    }

    /// Materialized N_t x N_w matrix including the prefactor.
    ComplexMatrix dense() const;

private:
    TimeGrid time_grid_;
    FrequencyGrid freq_grid_;
    bool normalized_;
    double scale_;
    // exp(-i w_j t_k) split into real and imaginary tables, row-major with
    // rows k (time) and cols j (frequency)
    std::vector<double> cos_;
    std::vector<double> sin_;
};

}  // namespace cs2d
