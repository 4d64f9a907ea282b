#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cs2dspec/analysis.hpp"
#include "cs2dspec/bpdn.hpp"
#include "cs2dspec/pipeline.hpp"
#include "cs2dspec/synth.hpp"

namespace cs2d {

enum class RunMode { Synth, Transform, Analyze, Compare };
enum class TransformKind { FT, CS };

struct RunConfig {
    RunMode mode = RunMode::Synth;
    std::string input;      // transform, analyze
    std::string output;     // every mode
    std::string ft_input;   // compare
    std::string cs_input;   // compare
    std::string report;     // transform --kind cs: per-solve table (optional)

    // synth
    std::string preset = "rb-sum";  // rb-sum | rb-diff | custom
    std::vector<ExponentialMode> modes;  // custom modes
    double frame_frequency = kRbFrame;
    double damping = kRbDamping;
    std::size_t n_tau = 51;
    std::size_t n_t = 50;
    double delta_tau = 26.687;
    double delta_t = 26.687;
    double population_time = 140.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;

    // transform
    TransformKind kind = TransformKind::CS;
    std::size_t n_omega_tau = 1000;
    std::size_t n_omega_t = 1000;
    BpdnConfig bpdn;
    std::size_t workers = 0;
    AxisOrder order = AxisOrder::TFirst;

    // analyze / compare
    double threshold = kDefaultPeakThreshold;
    double matching_bins = kDefaultMatchingBins;
    std::optional<double> report_frame;  // lab-frame columns in peak tables

    void validate() const;
};

/// Environment variable that, when set, overrides RunConfig::workers.
constexpr const char* kWorkersEnv = "CS2D_WORKERS";

/// Executes one mode and writes its outputs plus "<output>.meta.json".
/// Throws on failure.
void run(const RunConfig& config);

/// Parses arguments and runs; returns the process exit status. Diagnostics go
/// to stderr as a single line.
int run_cli(int argc, const char* const* argv);

}  // namespace cs2d
