#include "hgcav/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgcav/errors.hpp"

namespace hgcav {

namespace {

/// Per-lag sums for one stream.
struct LagSums {
    std::vector<std::int64_t> coincidences;
    std::vector<double> expected;  // S1 * S2 / P
};

LagSums lag_sums(std::span<const std::int64_t> n, std::size_t max_lag) {
    const std::size_t len = n.size();
    LagSums out;
    out.coincidences.assign(max_lag + 1, 0);
    out.expected.assign(max_lag + 1, 0.0);

    std::vector<std::int64_t> prefix(len + 1, 0);
    for (std::size_t t = 0; t < len; ++t) prefix[t + 1] = prefix[t] + n[t];

    for (std::size_t k = 0; k <= max_lag && k < len; ++k) {
        std::int64_t c = 0;
        if (k == 0) {
            for (std::size_t t = 0; t < len; ++t) c += n[t] * (n[t] - 1);
        } else {
            for (std::size_t t = 0; t + k < len; ++t) c += n[t] * n[t + k];
        }
        const std::size_t pairs = len - k;
        const auto s1 = static_cast<double>(prefix[len - k]);
        const auto s2 = static_cast<double>(prefix[len] - prefix[k]);
        out.coincidences[k] = c;
        out.expected[k] = s1 * s2 / static_cast<double>(pairs);
    }
    return out;
}

double zero_lag_factor(std::size_t k) { return k == 0 ? 2.0 : 1.0; }

CorrelationEstimate assemble(double bin_width, std::size_t max_lag, const std::vector<std::int64_t>& coincidences,
                             const std::vector<double>& expected) {
    CorrelationEstimate est;
    est.bin_width = bin_width;
    est.tau.resize(max_lag + 1);
    est.raw.resize(max_lag + 1);
    est.error.resize(max_lag + 1);
    est.coincidences = coincidences;
    bool any = false;
    for (std::size_t k = 0; k <= max_lag; ++k) {
        est.tau[k] = static_cast<double>(k) * bin_width;
        if (expected[k] > 0.0) {
            any = true;
            const auto c = static_cast<double>(coincidences[k]);
            est.raw[k] = c / expected[k];
            est.error[k] = std::sqrt(zero_lag_factor(k) * std::max(c, 1.0)) / expected[k];
        }
    }
    if (!any) throw UndefinedCorrelationError("correlation undefined: stream has no counts");
    est.g2 = est.raw;
    return est;
}

void check_uniform(const TransitRecord& rec, double& width) {
    if (rec.bins.empty()) throw ConfigError("record has no bins");
    const double w = rec.bins.front().probe.end - rec.bins.front().probe.start;
    for (std::size_t i = 0; i < rec.bins.size(); ++i) {
        const auto& b = rec.bins[i].probe;
        if (std::abs((b.end - b.start) - w) > 1e-6 * w) throw ConfigError("record bins are not uniform");
        if (i > 0 && std::abs(b.start - rec.bins[i - 1].probe.end) > 1e-6 * w) {
            throw ConfigError("record bins are not contiguous");
        }
    }
    if (width == 0.0) {
        width = w;
    } else if (std::abs(w - width) > 1e-6 * width) {
        throw ConfigError("records have incompatible bin widths");
    }
}

}  // namespace

CorrelationEstimate g2_of_stream(std::span<const std::int64_t> counts, double bin_width, double tau_max) {
    if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
    if (tau_max < 0.0) throw ConfigError("tau_max must be non-negative");
    if (counts.empty()) throw UndefinedCorrelationError("correlation undefined: empty stream");
    if (std::all_of(counts.begin(), counts.end(), [](std::int64_t c) { return c == 0; })) {
        throw UndefinedCorrelationError("correlation undefined: stream has no counts");
    }
    const auto max_lag = static_cast<std::size_t>(std::floor(tau_max / bin_width + 1e-9));
    if (2 * max_lag >= counts.size()) throw ConfigError("tau_max must be below half the record duration");

    const auto sums = lag_sums(counts, max_lag);
    auto est = assemble(bin_width, max_lag, sums.coincidences, sums.expected);
    est.transits = 1;
    return est;
}

std::pair<std::size_t, std::size_t> transit_window(std::span<const std::int64_t> counts, double bin_width,
                                                   double tau_max, const PoolingOptions& options) {
    const std::size_t len = counts.size();
    if (len == 0) return {0, 0};
    if (!options.trim) return {0, len - 1};

    const auto window = static_cast<std::size_t>(std::max(1, options.smoothing_bins));
    if (window > len) return {0, len - 1};

    // Moving average; its median is the baseline (the median of raw integer
    // counts is biased by up to half a count at low flux).
    std::vector<double> smooth;
    smooth.reserve(len - window + 1);
    std::int64_t running = 0;
    for (std::size_t i = 0; i < len; ++i) {
        running += counts[i];
        if (i >= window) running -= counts[i - window];
        if (i + 1 >= window) smooth.push_back(static_cast<double>(running) / static_cast<double>(window));
    }
    std::vector<double> sorted = smooth;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
    const double level = sorted[sorted.size() / 2];
    const double sigma = std::sqrt(std::max(level, 1.0) / static_cast<double>(window));

    const double pad = options.padding >= 0.0 ? options.padding : tau_max;
    const auto pad_bins = static_cast<std::size_t>(std::ceil(pad / bin_width - 1e-9));

    // Exceedances closer than the padding form one cluster; the cluster with the
    // largest summed deviation is the transit, isolated noise excursions are dropped.
    struct Cluster {
        std::size_t first, last;
        double weight;
    };
    std::vector<Cluster> clusters;
    for (std::size_t j = 0; j < smooth.size(); ++j) {
        const double dev = std::abs(smooth[j] - level);
        if (!(dev > options.threshold_sigma * sigma)) continue;
        const std::size_t lo = j, hi = j + window - 1;
        if (!clusters.empty() && lo <= clusters.back().last + pad_bins + 1) {
            clusters.back().last = std::max(clusters.back().last, hi);
            clusters.back().weight += dev;
        } else {
            clusters.push_back({lo, hi, dev});
        }
    }
    if (clusters.empty()) return {0, len - 1};
    const auto best = std::max_element(clusters.begin(), clusters.end(),
                                       [](const Cluster& a, const Cluster& b) { return a.weight < b.weight; });
    std::size_t first = best->first, last = best->last;

    first = first > pad_bins ? first - pad_bins : 0;
    last = std::min(len - 1, last + pad_bins);
    return {first, last};
}

CorrelationEstimate average_over_transits(std::span<const TransitRecord> records, double tau_max,
                                          const PoolingOptions& options) {
    if (records.empty()) throw ConfigError("pooling needs at least one record");
    if (tau_max < 0.0) throw ConfigError("tau_max must be non-negative");
    double width = 0.0;
    for (const auto& r : records) check_uniform(r, width);
    const auto max_lag = static_cast<std::size_t>(std::floor(tau_max / width + 1e-9));

    std::vector<std::int64_t> coincidences(max_lag + 1, 0);
    std::vector<std::vector<double>> expected_terms(max_lag + 1);
    int used = 0;
    for (const auto& r : records) {
        const auto counts = r.counts();
        const auto [first, last] = transit_window(counts, width, tau_max, options);
        std::span<const std::int64_t> part(counts.data() + first, last - first + 1);
        if (part.size() <= max_lag) continue;
        const auto sums = lag_sums(part, max_lag);
        for (std::size_t k = 0; k <= max_lag; ++k) {
            coincidences[k] += sums.coincidences[k];
            expected_terms[k].push_back(sums.expected[k]);
        }
        ++used;
    }
    if (used == 0) throw ConfigError("no record is longer than tau_max");

    // Sorted summation keeps the result independent of record order.
    std::vector<double> expected(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        auto& terms = expected_terms[k];
        std::sort(terms.begin(), terms.end());
        expected[k] = std::accumulate(terms.begin(), terms.end(), 0.0);
    }

    auto est = assemble(width, max_lag, coincidences, expected);
    est.transits = used;

    const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(options.tail_fraction * (max_lag + 1))));
    double norm = 0.0;
    for (std::size_t k = max_lag + 1 - tail; k <= max_lag; ++k) norm += est.raw[k];
    norm /= static_cast<double>(tail);
    if (!(norm > 0.0)) throw UndefinedCorrelationError("correlation tail is zero; cannot normalize");
    est.normalization = norm;
    for (std::size_t k = 0; k <= max_lag; ++k) {
        est.g2[k] = est.raw[k] / norm;
        est.error[k] /= norm;
    }
    return est;
}

std::vector<std::size_t> significant_maxima(const CorrelationEstimate& est, double tau_limit) {
    const auto& g = est.g2;
    const std::size_t len = g.size();
    std::vector<std::size_t> out;
    if (len < 2) return out;
    for (std::size_t i = 0; i < len; ++i) {
        if (tau_limit >= 0.0 && est.tau[i] >= tau_limit) break;
        const bool left_ok = i == 0 || g[i] > g[i - 1];
        const bool right_ok = i + 1 >= len || g[i] >= g[i + 1];
        if (!left_ok || !right_ok || i + 1 >= len) continue;

        const double need = 2.0 * est.error[i];
        double right_min = g[i];
        for (std::size_t j = i + 1; j < len && g[j] <= g[i]; ++j) right_min = std::min(right_min, g[j]);
        if (!(g[i] - right_min > need)) continue;
        if (i > 0) {
            double left_min = g[i];
            for (std::size_t j = i; j-- > 0 && g[j] <= g[i];) left_min = std::min(left_min, g[j]);
            if (!(g[i] - left_min > need)) continue;
        }
        out.push_back(i);
    }
    return out;
}

FrequencyEstimate characteristic_frequency(const CorrelationEstimate& est, double tau_limit) {
    const auto idx = significant_maxima(est, tau_limit);
    if (idx.size() < 3) {
        throw InsufficientStructureError("need at least 3 significant maxima, found " + std::to_string(idx.size()));
    }
    FrequencyEstimate out;
    for (auto i : idx) out.maxima.push_back(est.tau[i]);
    std::vector<double> spacing;
    for (std::size_t i = 1; i < out.maxima.size(); ++i) spacing.push_back(out.maxima[i] - out.maxima[i - 1]);
    const double n = static_cast<double>(spacing.size());
    const double mean = std::accumulate(spacing.begin(), spacing.end(), 0.0) / n;
    double var = 0.0;
    for (double s : spacing) var += (s - mean) * (s - mean);
    var = spacing.size() > 1 ? var / (n - 1.0) : 0.0;
    const double sigma_spacing = std::sqrt(var / n + est.bin_width * est.bin_width / 12.0);
    out.frequency = 1.0 / mean;
    out.sigma = sigma_spacing / (mean * mean);
    return out;
}

}  // namespace hgcav
