#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hgcav/transit.hpp"

namespace hgcav {

struct CorrelationEstimate {
    double bin_width = 0.0;     ///< s
    std::vector<double> tau;    ///< s, tau[k] = k * bin_width
    std::vector<double> g2;     ///< normalized
    std::vector<double> error;  ///< 1 sigma, same normalization as g2
    std::vector<double> raw;    ///< before large-tau normalization
    std::vector<std::int64_t> coincidences;
    int transits = 0;
    double normalization = 1.0;  ///< raw / g2
};

/// g2(k dt) = [sum_t n(t) n(t+k) / #pairs] / [mean(n) mean(n shifted)], with
/// n(n-1) at zero lag. The 1 sigma error for independent Poisson bins is
/// g2 / sqrt(C_k), C_k the coincidence count (sqrt(2) larger at k = 0).
/// Requires tau_max < half the record; throws UndefinedCorrelationError for
/// an empty or all-zero stream.
CorrelationEstimate g2_of_stream(std::span<const std::int64_t> counts, double bin_width, double tau_max);

struct PoolingOptions {
    bool trim = true;              ///< restrict each record to its transit region
    int smoothing_bins = 10;       ///< moving-average window for transit detection
    double threshold_sigma = 3.0;  ///< deviation from the median level, in shot-noise sigmas
    double padding = -1.0;         ///< s kept around the transit region; negative means tau_max
    double tail_fraction = 0.2;    ///< share of the tau grid used for normalization
};

/// First and last bin index (inclusive) a record contributes to pooling: the
/// strongest cluster of smoothed bins deviating from the median level, widened
/// by the padding. Records without a deviation contribute whole.
std::pair<std::size_t, std::size_t> transit_window(std::span<const std::int64_t> counts, double bin_width,
                                                   double tau_max, const PoolingOptions& options = {});

/// Pools the coincidence counts of many records (total coincidences over total
/// expected coincidences per lag) and normalizes to the mean of the last
/// `tail_fraction` of the tau grid. Independent of the record order. Throws
/// ConfigError for incompatible or non-uniform bin widths.
CorrelationEstimate average_over_transits(std::span<const TransitRecord> records, double tau_max,
                                          const PoolingOptions& options = {});

struct FrequencyEstimate {
    double frequency = 0.0;  ///< Hz
    double sigma = 0.0;      ///< Hz
    std::vector<double> maxima;  ///< tau of the significant maxima, s
};

/// Significant local maxima of g2: a maximum counts when it rises more than
/// twice its error above the lowest point on each side before a higher value
/// (one-sided at tau = 0). Optionally restricted to tau < `tau_limit`.
std::vector<std::size_t> significant_maxima(const CorrelationEstimate& est, double tau_limit = -1.0);

/// 1 / mean spacing of consecutive significant maxima. Throws
/// InsufficientStructureError for fewer than three.
FrequencyEstimate characteristic_frequency(const CorrelationEstimate& est, double tau_limit = -1.0);

}  // namespace hgcav
