#pragma once

// Text formats.
//
// SIG2D: header lines "# key=value" (delta_tau_fs, delta_t_fs,
// population_time_fs, n_tau, n_t, label), then n_tau * n_t lines
// "tau_index t_index re im" in row-major order.
//
// SPEC2D: header with omega_tau_{min,max,spacing,count},
// omega_t_{min,max,spacing,count}, population_time_fs, provenance, then
// "omega_tau_index omega_t_index re im" lines.
//
// Doubles are written in shortest round-trip form, so write-then-read is
// bit-exact.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cs2dspec/analysis.hpp"
#include "cs2dspec/pipeline.hpp"
#include "cs2dspec/spectral_core.hpp"

namespace cs2d {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& message);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

SignalGrid2D read_signal_grid(std::istream& in, const std::string& source = "<stream>");
SignalGrid2D read_signal_grid(const std::filesystem::path& path);
void write_signal_grid(const SignalGrid2D& signal, std::ostream& out);
void write_signal_grid(const SignalGrid2D& signal, const std::filesystem::path& path);

Spectrum2D read_spectrum(std::istream& in, const std::string& source = "<stream>");
Spectrum2D read_spectrum(const std::filesystem::path& path);
void write_spectrum(const Spectrum2D& spectrum, std::ostream& out);
void write_spectrum(const Spectrum2D& spectrum, const std::filesystem::path& path);

/// Tab-separated peak table. With a frame frequency, lab-frame columns
/// (offset + frame) follow the rotating-frame ones.
void write_peak_table(const std::vector<Peak>& peaks, std::optional<double> frame_frequency, std::ostream& out);
void write_comparison_table(const ResolutionComparison& cmp, std::ostream& out);
void write_solve_report(const PipelineReport& report, std::ostream& out);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace cs2d
