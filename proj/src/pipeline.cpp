#include "cs2dspec/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

namespace cs2d {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Solves every row of `input` against `op`; rows of the result are the
// rescaled coefficient vectors.
ComplexMatrix solve_rows(const ComplexMatrix& input, const SensingOperator& op, const BpdnConfig& config,
                         std::size_t workers, PassReport& report, const char* what) {
    const auto start = Clock::now();
    ComplexMatrix out(input.rows(), op.cols());
    report.records.assign(input.rows(), {});
    parallel_for(input.rows(), workers, [&](std::size_t i) {
        const auto row = input.row(i);
        SolveRecord& rec = report.records[i];
        rec.index = i;
        rec.trivial = std::all_of(row.begin(), row.end(), [](Complex z) { return z == Complex{}; });
        BpdnResult res;
        try {
            res = solve_bpdn_normalized(op, row, config);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(std::string(what) + " " + std::to_string(i) + ": " + e.what());
        }
        rec.status = res.status;
        rec.outer_iterations = res.outer_iterations;
        rec.inner_iterations = res.inner_iterations;
        rec.residual_norm = res.residual_norm;
        std::copy(res.coefficients.begin(), res.coefficients.end(), out.row(i).begin());
    });
    report.seconds = seconds_since(start);
    return out;
}

// out(k, :) = dt * sum_j exp(+i w_k t_j) in(j, :), applied along the rows
// of `in` (each column of `in` is one series).
ComplexMatrix dft_columns(const ComplexMatrix& in, const TimeGrid& time_grid, const FrequencyGrid& freq_grid) {
    const std::size_t n = time_grid.count();
    const auto t = time_grid.times();
    ComplexMatrix out(freq_grid.count(), in.cols());
    ComplexSeries ph(n);
    std::vector<Complex> acc(in.cols());
    for (std::size_t k = 0; k < freq_grid.count(); ++k) {
        const double w = freq_grid.frequency(k);
        for (std::size_t j = 0; j < n; ++j) ph[j] = {std::cos(w * t[j]), std::sin(w * t[j])};
        std::fill(acc.begin(), acc.end(), Complex{});
        for (std::size_t j = 0; j < n; ++j) {
            const auto src = in.row(j);
            const double pr = ph[j].real(), pi = ph[j].imag();
            for (std::size_t c = 0; c < acc.size(); ++c) {
                acc[c] += Complex(pr * src[c].real() - pi * src[c].imag(), pr * src[c].imag() + pi * src[c].real());
            }
        }
        auto dst = out.row(k);
        for (std::size_t c = 0; c < acc.size(); ++c) dst[c] = time_grid.delta() * acc[c];
    }
    return out;
}

}  // namespace

void HalfTransformed2D::validate() const {
    if (values.rows() != tau_grid.count() || values.cols() != omega_t_grid.count())
        throw std::invalid_argument("HalfTransformed2D: matrix shape does not match grids");
    if (!values.all_finite()) throw std::invalid_argument("HalfTransformed2D: non-finite value");
}

std::string to_string(AxisOrder order) { return order == AxisOrder::TFirst ? "t-first" : "tau-first"; }

AxisOrder axis_order_from_string(const std::string& s) {
    if (s == "t-first" || s == "t") return AxisOrder::TFirst;
    if (s == "tau-first" || s == "tau") return AxisOrder::TauFirst;
    throw std::invalid_argument("unknown axis order '" + s + "' (expected t-first|tau-first)");
}

std::size_t PassReport::count(SolveStatus status) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const SolveRecord& r) { return r.status == status; }));
}

std::size_t resolve_worker_count(std::size_t requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::min(resolve_worker_count(workers), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

std::pair<HalfTransformed2D, PassReport> cs_pass_t(const SignalGrid2D& signal, const FrequencyGrid& freq_grid_t,
                                                   const BpdnConfig& config, std::size_t workers) {
    signal.validate();
    config.validate();
    const SensingOperator op(signal.t_grid, freq_grid_t, true);
    PassReport report{"t", {}, 0.0};
    HalfTransformed2D half{signal.tau_grid, freq_grid_t, signal.population_time,
                           solve_rows(signal.values, op, config, workers, report, "row")};
    return {std::move(half), std::move(report)};
}

std::pair<Spectrum2D, PassReport> cs_pass_tau(const HalfTransformed2D& half, const FrequencyGrid& freq_grid_tau,
                                              const BpdnConfig& config, std::size_t workers) {
    half.validate();
    config.validate();
    const SensingOperator op(half.tau_grid, freq_grid_tau, true);
    PassReport report{"tau", {}, 0.0};
    const ComplexMatrix solved = solve_rows(half.values.transposed(), op, config, workers, report, "column");
    Spectrum2D spec{freq_grid_tau, half.omega_t_grid, half.population_time, solved.transposed(), Provenance::CS};
    return {std::move(spec), std::move(report)};
}

std::pair<Spectrum2D, PipelineReport> cs2d(const SignalGrid2D& signal, std::size_t n_omega_tau,
                                           std::size_t n_omega_t, const BpdnConfig& config,
                                           const PipelineOptions& options) {
    signal.validate();
    config.validate();
    const FrequencyGrid w_tau = make_frequency_grid(signal.tau_grid, n_omega_tau);
    const FrequencyGrid w_t = make_frequency_grid(signal.t_grid, n_omega_t);

    PipelineReport report;
    report.eta = config.eta;
    report.order = options.order;
    report.workers = resolve_worker_count(options.workers);

    if (options.order == AxisOrder::TFirst) {
        auto [half, first] = cs_pass_t(signal, w_t, config, options.workers);
        auto [spec, second] = cs_pass_tau(half, w_tau, config, options.workers);
        report.first = std::move(first);
        report.second = std::move(second);
        return {std::move(spec), std::move(report)};
    }

    // Swap the roles of the axes and transpose the result back.
    const SignalGrid2D swapped{signal.t_grid, signal.tau_grid, signal.population_time,
                               signal.values.transposed(), signal.label};
    auto [half, first] = cs_pass_t(swapped, w_tau, config, options.workers);
    auto [spec, second] = cs_pass_tau(half, w_t, config, options.workers);
    first.axis = "tau";
    second.axis = "t";
    report.first = std::move(first);
    report.second = std::move(second);
    Spectrum2D out{w_tau, w_t, signal.population_time, spec.values.transposed(), Provenance::CS};
    return {std::move(out), std::move(report)};
}

Spectrum2D ft2d(const SignalGrid2D& signal, std::size_t n_omega_tau, std::size_t n_omega_t, AxisOrder order) {
    signal.validate();
    const FrequencyGrid w_tau = make_frequency_grid(signal.tau_grid, n_omega_tau);
    const FrequencyGrid w_t = make_frequency_grid(signal.t_grid, n_omega_t);
    ComplexMatrix values;
    if (order == AxisOrder::TFirst) {
        const ComplexMatrix half = dft_columns(signal.values.transposed(), signal.t_grid, w_t).transposed();
        values = dft_columns(half, signal.tau_grid, w_tau);
    } else {
        const ComplexMatrix half = dft_columns(signal.values, signal.tau_grid, w_tau);
        values = dft_columns(half.transposed(), signal.t_grid, w_t).transposed();
    }
    return {w_tau, w_t, signal.population_time, std::move(values), Provenance::FT};
}

}  // namespace cs2d
