#pragma once

// Two-pass 2D sparse recovery: a 1D BPDN solve per row in t, then one per
// column in tau (or the reverse), plus the direct 2D discrete FT baseline.

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cs2dspec/bpdn.hpp"
#include "cs2dspec/spectral_core.hpp"

namespace cs2d {

/// S(tau, w_t): rows tau, columns w_t.
struct HalfTransformed2D {
    TimeGrid tau_grid;
    FrequencyGrid omega_t_grid;
    double population_time = 0.0;
    ComplexMatrix values;

    void validate() const;
};

enum class AxisOrder { TFirst, TauFirst };

std::string to_string(AxisOrder order);
AxisOrder axis_order_from_string(const std::string& s);

struct SolveRecord {
    std::size_t index = 0;  // row (pass over t) or column (pass over tau)
    SolveStatus status = SolveStatus::Converged;
    std::size_t outer_iterations = 0;
    std::size_t inner_iterations = 0;
    double residual_norm = 0.0;
    bool trivial = false;  // all-zero input, no solve needed
};

struct PassReport {
    std::string axis;  // "t" or "tau"
    std::vector<SolveRecord> records;
    double seconds = 0.0;

    std::size_t count(SolveStatus status) const;
};

struct PipelineReport {
    double eta = 0.0;
    AxisOrder order = AxisOrder::TFirst;
    std::size_t workers = 1;
    PassReport first;
    PassReport second;

    std::size_t solve_count() const { return first.records.size() + second.records.size(); }
};

struct PipelineOptions {
    std::size_t workers = 0;  // 0 = all available processors
    AxisOrder order = AxisOrder::TFirst;
};

/// 0 maps to the number of available processors (at least 1).
std::size_t resolve_worker_count(std::size_t requested);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Every index runs
/// exactly once; if any call throws, the exception of the lowest failing
/// index is rethrown after all threads have joined.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Row i of the result is solve_bpdn_normalized of signal row i.
std::pair<HalfTransformed2D, PassReport> cs_pass_t(const SignalGrid2D& signal, const FrequencyGrid& freq_grid_t,
                                                   const BpdnConfig& config, std::size_t workers = 0);

/// Column j of the result is solve_bpdn_normalized of half-transform column j.
std::pair<Spectrum2D, PassReport> cs_pass_tau(const HalfTransformed2D& half, const FrequencyGrid& freq_grid_tau,
                                              const BpdnConfig& config, std::size_t workers = 0);

std::pair<Spectrum2D, PipelineReport> cs2d(const SignalGrid2D& signal, std::size_t n_omega_tau,
                                           std::size_t n_omega_t, const BpdnConfig& config,
                                           const PipelineOptions& options = {});

Spectrum2D ft2d(const SignalGrid2D& signal, std::size_t n_omega_tau, std::size_t n_omega_t,
                AxisOrder order = AxisOrder::TFirst);

}  // namespace cs2d
