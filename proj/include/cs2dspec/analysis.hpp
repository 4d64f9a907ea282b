#pragma once

// Peak picking, axis-aligned half-maximum widths and FT-vs-CS width
// comparison on spectrum magnitudes.

#include <cstddef>
#include <utility>
#include <vector>

#include "cs2dspec/spectral_core.hpp"

namespace cs2d {

struct Peak {
    std::size_t row = 0;  // omega_tau index
    std::size_t col = 0;  // omega_t index
    double omega_tau = 0.0;
    double omega_t = 0.0;
    double magnitude = 0.0;
    double fwhm_tau = 0.0;
    double fwhm_t = 0.0;
    bool single_bin_tau = false;
    bool single_bin_t = false;
    bool truncated_tau = false;
    bool truncated_t = false;
};

struct Width {
    double fwhm = 0.0;
    bool single_bin = false;
    bool truncated = false;
};

constexpr double kDefaultPeakThreshold = 0.05;
constexpr double kDefaultMatchingBins = 3.0;

/// Half-maximum width of profile[peak] with linear interpolation between
/// bins. A peak with no neighbour at or above half maximum reports one
/// spacing; a side that never drops to half maximum stops at the edge.
Width half_max_width(std::span<const double> profile, std::size_t peak, double spacing);

/// Strict local maxima of |values| (8-neighbourhood) above
/// threshold_fraction * global max, by descending magnitude, ties by
/// (omega_tau, omega_t). Widths are filled in.
std::vector<Peak> find_peaks(const Spectrum2D& spectrum, double threshold_fraction = kDefaultPeakThreshold);

/// Widths along omega_tau and omega_t through the peak bin.
std::pair<Width, Width> measure_fwhm(const Spectrum2D& spectrum, const Peak& peak);

struct MatchedPeak {
    Peak ft;
    Peak cs;
    double ratio_tau = 0.0;  // fwhm_ft / fwhm_cs
    double ratio_t = 0.0;
};

struct ResolutionComparison {
    std::vector<MatchedPeak> matched;
    std::vector<Peak> unmatched_ft;
    std::vector<Peak> unmatched_cs;
};

/// FT peaks in descending magnitude each take the nearest free CS peak within
/// matching_radius (rad/fs, Euclidean in the frequency plane).
ResolutionComparison compare_resolution(const Spectrum2D& ft, const Spectrum2D& cs, double matching_radius,
                                        double threshold_fraction = kDefaultPeakThreshold);

/// kDefaultMatchingBins times the coarser of the two grid spacings.
double default_matching_radius(const Spectrum2D& spectrum);

}  // namespace cs2d
