#include "hgcav/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "hgcav/errors.hpp"
#include "hgcav/simplex.hpp"
#include "hgcav/units.hpp"

namespace hgcav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Deviance gain over the empty-cavity model below which a fitted dip is
// indistinguishable from shot noise (pure-baseline records reach ~16 in 1e2 draws).
constexpr double kMinDipSignificance = 20.0;

double negative_log_likelihood(std::span<const std::int64_t> n, std::span<const double> mu) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (mu[i] > 0.0) {
            sum += mu[i] - static_cast<double>(n[i]) * std::log(mu[i]);
        } else if (n[i] > 0) {
            return kInf;
        }
    }
    return sum;
}

bool contains(const std::vector<TrajectoryParam>& v, TrajectoryParam p) {
    return std::find(v.begin(), v.end(), p) != v.end();
}

/// Maps the free-parameter vector (scaled to O(1)) to a trajectory.
struct ParamMap {
    std::vector<TrajectoryParam> free;
    Trajectory base;
    double time_scale = 1.0;
    double length_scale = 1.0;
    double velocity_scale = 1.0;

    Trajectory to_trajectory(const std::vector<double>& p) const {
        Trajectory t = base;
        for (std::size_t k = 0; k < free.size(); ++k) {
            switch (free[k]) {
                case TrajectoryParam::t0: t.t0 = base.t0 + p[k] * time_scale; break;
                case TrajectoryParam::x0: t.x0 = p[k] * length_scale; break;
                case TrajectoryParam::v: t.v = p[k] * velocity_scale; break;
            }
        }
        return t;
    }

    std::vector<double> from_trajectory(const Trajectory& t) const {
        std::vector<double> p(free.size());
        for (std::size_t k = 0; k < free.size(); ++k) {
            switch (free[k]) {
                case TrajectoryParam::t0: p[k] = (t.t0 - base.t0) / time_scale; break;
                case TrajectoryParam::x0: p[k] = t.x0 / length_scale; break;
                case TrajectoryParam::v: p[k] = t.v / velocity_scale; break;
            }
        }
        return p;
    }

    double scale(std::size_t k) const {
        switch (free[k]) {
            case TrajectoryParam::t0: return time_scale;
            case TrajectoryParam::x0: return length_scale;
            case TrajectoryParam::v: return velocity_scale;
        }
        return 1.0;
    }
};

/// Inverts a small symmetric positive-definite matrix via Cholesky; false if not PD.
bool invert_spd(std::vector<std::vector<double>>& a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // inv(L), then inv(A) = inv(L)^T inv(L)
    std::vector<std::vector<double>> li(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        li[i][i] = 1.0 / l[i][i];
        for (std::size_t j = 0; j < i; ++j) {
            double s = 0.0;
            for (std::size_t k = j; k < i; ++k) s -= l[i][k] * li[k][j];
            li[i][j] = s / l[i][i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = std::max(i, j); k < n; ++k) s += li[k][i] * li[k][j];
            a[i][j] = s;
        }
    }
    return true;
}

/// Centroid and spread (s) of the dominant deviation from baseline.
struct DipSummary {
    double center = 0.0;
    double width = 0.0;
    bool found = false;
};

DipSummary summarize_dip(const std::vector<ProbeBin>& bins, std::span<const std::int64_t> n,
                         std::span<const double> baseline) {
    const std::size_t size = bins.size();
    const int half = 1;
    std::vector<double> dev(size, 0.0), noise(size, 0.0);
    for (std::size_t i = 0; i < size; ++i) {
        double d = 0.0, b = 0.0;
        for (int k = -half; k <= half; ++k) {
            const auto j = static_cast<long>(i) + k;
            if (j < 0 || j >= static_cast<long>(size)) continue;
            d += baseline[j] - static_cast<double>(n[j]);
            b += baseline[j];
        }
        dev[i] = d;
        noise[i] = std::sqrt(std::max(b, 1e-12));
    }
    const double net = std::accumulate(dev.begin(), dev.end(), 0.0);
    const double sign = net >= 0.0 ? 1.0 : -1.0;

    DipSummary out;
    for (double threshold : {2.0, 0.0}) {
        double w_sum = 0.0, t_sum = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            const double w = sign * dev[i];
            if (w > threshold * noise[i]) {
                w_sum += w;
                t_sum += w * bins[i].mid();
            }
        }
        if (w_sum <= 0.0) continue;
        out.center = t_sum / w_sum;
        double var = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            const double w = sign * dev[i];
            if (w > threshold * noise[i]) var += w * (bins[i].mid() - out.center) * (bins[i].mid() - out.center);
        }
        out.width = std::sqrt(var / w_sum);
        out.found = true;
        break;
    }
    if (!out.found || !(out.width > 0.0)) {
        out.center = 0.5 * (bins.front().start + bins.back().end);
        out.width = 0.25 * (bins.back().end - bins.front().start);
    }
    return out;
}

std::vector<double> intersect_offsets(const std::vector<std::vector<double>>& sets, double tol) {
    std::vector<double> out = sets.front();
    for (std::size_t s = 1; s < sets.size(); ++s) {
        std::vector<double> kept;
        for (double x : out) {
            if (std::any_of(sets[s].begin(), sets[s].end(), [&](double y) { return std::abs(x - y) < tol; })) {
                kept.push_back(x);
            }
        }
        out = std::move(kept);
    }
    return out;
}

double max_abs_hermite_function(int m) {
    const double u_max = std::sqrt(2.0 * m + 1.0) + 3.0;
    const int samples = 4000;
    double best_u = 0.0, best = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double u = u_max * i / samples;
        const double a = std::abs(hermite_function(m, u));
        if (a > best) {
            best = a;
            best_u = u;
        }
    }
    double lo = std::max(0.0, best_u - u_max / samples), hi = best_u + u_max / samples;
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
        const double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
        if (std::abs(hermite_function(m, c)) > std::abs(hermite_function(m, d))) {
            hi = d;
        } else {
            lo = c;
        }
    }
    return std::max(best, std::abs(hermite_function(m, 0.5 * (lo + hi))));
}

}  // namespace

const char* to_string(TrajectoryParam p) {
    switch (p) {
        case TrajectoryParam::t0: return "t0";
        case TrajectoryParam::x0: return "x0";
        case TrajectoryParam::v: return "v";
    }
    return "?";
}

TrajectoryParam trajectory_param_from_string(const std::string& name) {
    if (name == "t0") return TrajectoryParam::t0;
    if (name == "x0") return TrajectoryParam::x0;
    if (name == "v") return TrajectoryParam::v;
    throw ConfigError("unknown trajectory parameter '" + name + "' (expected t0, x0 or v)");
}

double TransitFit::sigma(TrajectoryParam p) const {
    switch (p) {
        case TrajectoryParam::t0: return sigma_t0;
        case TrajectoryParam::x0: return sigma_x0;
        case TrajectoryParam::v: return sigma_v;
    }
    return 0.0;
}

double TransitFit::value(TrajectoryParam p) const {
    switch (p) {
        case TrajectoryParam::t0: return estimate.t0;
        case TrajectoryParam::x0: return estimate.x0;
        case TrajectoryParam::v: return estimate.v;
    }
    return 0.0;
}

double poisson_deviance(std::span<const std::int64_t> counts, std::span<const double> expected) {
    double d = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double n = static_cast<double>(counts[i]);
        const double mu = expected[i];
        if (n > 0.0) {
            d += n * std::log(n / mu) - (n - mu);
        } else {
            d += mu;
        }
    }
    return 2.0 * d;
}

// --- single-record fit -----------------------------------------------------------

TransitFit fit_transit(const TransitRecord& record, const ModeTable& modes, const CavityParams& params,
                       const FitOptions& options) {
    if (record.bins.size() < 10) throw ConfigError("fit needs at least 10 bins");
    if (!(record.rate > 0.0)) throw ConfigError("fit needs a positive detection rate R0");
    for (std::size_t i = 0; i < options.free.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (options.free[i] == options.free[j]) throw ConfigError("free parameters listed twice");
        }
    }

    const TransitModel model(record.probe_bins(), modes, params, record.rate, options.axial_nodes);
    const auto counts = record.counts();
    const auto baseline = model.baseline_counts();
    const auto& bins = model.bins();

    std::vector<const ModeSpec*> used_modes;
    for (const auto& b : bins) {
        const ModeSpec* m = &modes.at(b.mode_id);
        if (std::find(used_modes.begin(), used_modes.end(), m) == used_modes.end()) used_modes.push_back(m);
    }
    const double waist = used_modes.front()->waist;
    const bool signed_offsets = std::any_of(used_modes.begin(), used_modes.end(),
                                            [](const ModeSpec* m) { return m->angle != 0.0; });

    const auto dip = summarize_dip(bins, counts, baseline);
    std::vector<double> widths;
    for (const auto& b : bins) widths.push_back(b.end - b.start);
    std::nth_element(widths.begin(), widths.begin() + static_cast<long>(widths.size() / 2), widths.end());
    const double bin_width = widths[widths.size() / 2];

    const bool free_t0 = contains(options.free, TrajectoryParam::t0);
    const bool free_x0 = contains(options.free, TrajectoryParam::x0);
    const bool free_v = contains(options.free, TrajectoryParam::v);

    Trajectory guess = options.fixed;
    if (free_t0) guess.t0 = dip.center;
    if (free_v) guess.v = 0.8 * waist / dip.width;
    if (options.init) {
        if (free_t0) guess.t0 = options.init->t0;
        if (free_x0) guess.x0 = options.init->x0;
        if (free_v) guess.v = options.init->v;
    }
    if (!(std::abs(guess.v) > 0.0)) throw ConfigError("fixed velocity must be non-zero");

    ParamMap map;
    map.free = options.free;
    map.base = guess;
    map.length_scale = waist;
    map.velocity_scale = std::abs(guess.v);
    map.time_scale = waist / std::abs(guess.v);

    std::vector<double> mu(bins.size());
    int evaluations = 0;
    auto objective = [&](const std::vector<double>& p) {
        ++evaluations;
        const auto traj = map.to_trajectory(p);
        if (free_v && !(traj.v > 0.0)) return kInf;
        model.expected_counts(traj, mu);
        return negative_log_likelihood(counts, mu);
    };

    // Start points.
    std::vector<std::vector<double>> starts;
    std::vector<std::size_t> start_group;  // index of the x0 offset each start was built from
    if (options.init || options.free.empty()) {
        starts.push_back(map.from_trajectory(guess));
    } else {
        std::vector<double> offsets{0.05, 0.2, 0.35, 0.5, 0.7, 0.9, 1.1, 1.3, 1.6, 2.0};
        if (signed_offsets) {
            const auto n = offsets.size();
            for (std::size_t i = 0; i < n; ++i) offsets.push_back(-offsets[i]);
        }
        const std::vector<double> speed_factors = free_v ? std::vector<double>{0.5, 0.7, 1.0, 1.4, 2.0}
                                                         : std::vector<double>{1.0};
        const std::vector<double> x_values = free_x0 ? offsets : std::vector<double>{guess.x0 / waist};
        // Midpoint sampling ripples the likelihood in t0 with the bin period.
        const std::vector<double> t_shifts = free_t0 ? std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}
                                                     : std::vector<double>{0.0};
        for (std::size_t xi = 0; xi < x_values.size(); ++xi) {
            const double xs = x_values[xi];
            for (double vs : speed_factors) {
                for (double ts : t_shifts) {
                    Trajectory t = guess;
                    t.x0 = xs * waist;
                    t.v = guess.v * vs;
                    t.t0 = guess.t0 + ts * bin_width;
                    starts.push_back(map.from_trajectory(t));
                    start_group.push_back(xi);
                }
            }
        }
    }

    TransitFit fit;
    fit.free = options.free;
    for (auto p : {TrajectoryParam::t0, TrajectoryParam::x0, TrajectoryParam::v}) {
        if (!contains(options.free, p)) fit.fixed.push_back(p);
    }

    std::vector<double> best_p = starts.front();
    double best_val = kInf;
    bool converged = true;

    if (!options.free.empty()) {
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t i = 0; i < starts.size(); ++i) ranked.emplace_back(objective(starts[i]), i);
        std::sort(ranked.begin(), ranked.end());
        // Polish the best start of every x0 offset: with sparse counts the
        // raw ranking is noisy and separate basins in x0 must all be tried.
        std::vector<std::size_t> chosen;
        std::vector<bool> seen(start_group.empty() ? 1 : start_group.size(), false);
        for (const auto& [val, i] : ranked) {
            const std::size_t g = start_group.empty() ? 0 : start_group[i];
            if (g < seen.size() && seen[g]) continue;
            if (g < seen.size()) seen[g] = true;
            chosen.push_back(i);
        }
        for (std::size_t r = 0; r < ranked.size() && chosen.size() < 5; ++r) {
            if (std::find(chosen.begin(), chosen.end(), ranked[r].second) == chosen.end()) chosen.push_back(ranked[r].second);
        }
        const std::size_t polish = chosen.size();
        const std::vector<double> step(options.free.size(), 0.15);

        for (std::size_t r = 0; r < polish; ++r) {
            SimplexOptions so;
            so.max_evaluations = std::max(100, (options.max_evaluations - evaluations) / static_cast<int>(polish - r + 1));
            const auto res = nelder_mead(objective, starts[chosen[r]], step, so);
            if (res.value < best_val) {
                best_val = res.value;
                best_p = res.x;
            }
        }
        // Hop across neighbouring ripples in t0 and keep any improvement.
        if (free_t0 && !options.init) {
            for (double hop : {-1.5, -1.0, -0.5, 0.5, 1.0, 1.5}) {
                auto t = map.to_trajectory(best_p);
                t.t0 += hop * bin_width;
                SimplexOptions so;
                so.max_evaluations = 400;
                const auto res = nelder_mead(objective, map.from_trajectory(t), step, so);
                if (res.value < best_val) {
                    best_val = res.value;
                    best_p = res.x;
                }
            }
        }
        // Restart from the best point to shake off a collapsed simplex.
        SimplexOptions so;
        so.max_evaluations = std::max(200, options.max_evaluations - evaluations);
        const auto res = nelder_mead(objective, best_p, std::vector<double>(options.free.size(), 0.02), so);
        converged = res.converged;
        if (res.value <= best_val) {
            best_val = res.value;
            best_p = res.x;
        }
    } else {
        best_val = objective(best_p);
    }

    fit.estimate = map.to_trajectory(best_p);
    fit.converged = converged && evaluations <= options.max_evaluations + 200;
    fit.negative_log_likelihood = best_val;
    fit.expected = model.expected_counts(fit.estimate);
    fit.deviance = poisson_deviance(counts, fit.expected);
    fit.residuals.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) fit.residuals[i] = static_cast<double>(counts[i]) - fit.expected[i];

    bool deviates = false;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (baseline[i] <= 0.0) continue;
        const double ratio = fit.expected[i] / baseline[i];
        if (ratio < 0.9 || ratio > 1.1) {
            deviates = true;
            break;
        }
    }
    if (!deviates) throw NoTransitError("no transit: best model stays within 10% of the empty-cavity level");
    if (poisson_deviance(counts, baseline) - fit.deviance < kMinDipSignificance) {
        throw NoTransitError("no transit: fitted dip is not significant against the empty-cavity level");
    }

    // Observed information from a central-difference Hessian.
    const std::size_t dim = options.free.size();
    if (dim > 0) {
        const double h = 1e-3;
        std::vector<std::vector<double>> hess(dim, std::vector<double>(dim, 0.0));
        auto f_at = [&](std::size_t i, double di, std::size_t j, double dj) {
            auto p = best_p;
            p[i] += di;
            p[j] += dj;
            return objective(p);
        };
        for (std::size_t i = 0; i < dim; ++i) {
            hess[i][i] = (f_at(i, h, i, 0.0) - 2.0 * best_val + f_at(i, -h, i, 0.0)) / (h * h);
            for (std::size_t j = 0; j < i; ++j) {
                const double v = (f_at(i, h, j, h) - f_at(i, h, j, -h) - f_at(i, -h, j, h) + f_at(i, -h, j, -h)) /
                                 (4.0 * h * h);
                hess[i][j] = hess[j][i] = v;
            }
        }
        auto cov = hess;
        fit.covariance_ok = invert_spd(cov);
        for (std::size_t k = 0; k < dim; ++k) {
            double var = 0.0;
            if (fit.covariance_ok) {
                var = cov[k][k];
            } else {
                var = hess[k][k] > 0.0 ? 1.0 / hess[k][k] : kInf;
            }
            const double sigma = std::sqrt(var) * map.scale(k);
            switch (options.free[k]) {
                case TrajectoryParam::t0: fit.sigma_t0 = sigma; break;
                case TrajectoryParam::x0: fit.sigma_x0 = sigma; break;
                case TrajectoryParam::v: fit.sigma_v = sigma; break;
            }
        }
    }
    fit.evaluations = evaluations;

    // Offsets indistinguishable under every probed mode.
    if (signed_offsets) {
        fit.equivalent_x0 = {fit.estimate.x0};
    } else {
        std::vector<std::vector<double>> sets;
        for (const ModeSpec* m : used_modes) {
            try {
                sets.push_back(equivalent_offsets(*m, fit.estimate.x0));
            } catch (const ZeroCouplingError&) {
                sets.push_back({fit.estimate.x0});
            }
        }
        fit.equivalent_x0 = intersect_offsets(sets, 1e-2 * waist);
        if (std::none_of(fit.equivalent_x0.begin(), fit.equivalent_x0.end(),
                         [&](double x) { return x == fit.estimate.x0; })) {
            fit.equivalent_x0.push_back(fit.estimate.x0);
            std::sort(fit.equivalent_x0.begin(), fit.equivalent_x0.end());
        }
    }
    return fit;
}

// --- equivalent offsets ------------------------------------------------------------

std::vector<double> equivalent_offsets(const ModeSpec& mode, double x0) {
    if (mode.angle != 0.0) throw ConfigError("equivalent offsets need an unrotated mode");
    const double scale = std::sqrt(2.0) / mode.waist;  // x -> u
    const double u0 = x0 * scale;
    const double target = std::abs(hermite_function(mode.m, u0));
    if (mode.m > 0 && target <= 1e-14 * max_abs_hermite_function(mode.m)) {
        throw ZeroCouplingError("offset lies on a nodal line: the transit produces no signal");
    }

    auto f = [&](double u) {
        const double h = hermite_function(mode.m, u);
        return h * h - target * target;
    };
    const double u_max = std::max(std::sqrt(2.0 * mode.m + 1.0) + 6.0, std::abs(u0) + 1.0);
    const int samples = 8000;
    std::vector<double> roots{u0, -u0};
    double prev_u = -u_max, prev_f = f(prev_u);
    for (int i = 1; i <= samples; ++i) {
        const double u = -u_max + 2.0 * u_max * i / samples;
        const double fu = f(u);
        if (prev_f == 0.0) {
            roots.push_back(prev_u);
        } else if (prev_f * fu < 0.0) {
            double lo = prev_u, hi = u, flo = prev_f;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * u_max; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_u = u;
        prev_f = fu;
    }

    // The input offset and its mirror take precedence over nearby numerical roots.
    const double tol = 1e-2 * std::sqrt(2.0);
    std::vector<double> unique;
    for (double r : roots) {
        if (std::none_of(unique.begin(), unique.end(), [&](double q) { return std::abs(q - r) < tol; })) {
            unique.push_back(r);
        }
    }
    std::vector<double> out;
    out.reserve(unique.size());
    for (double u : unique) out.push_back(u == u0 ? x0 : (u == -u0 ? -x0 : u / scale));
    std::sort(out.begin(), out.end());
    return out;
}

// --- two-mode inversion --------------------------------------------------------------

double max_coupling(const CavityParams& params, const ModeSpec& mode) {
    return params.g0 * std::sqrt(kPi) * max_abs_hermite_function(mode.m) * max_abs_hermite_function(mode.n);
}

PositionCandidateSet invert_two_mode(const CouplingMeasurement& first, const CouplingMeasurement& second,
                                     const ModeSpec& first_mode, const ModeSpec& second_mode,
                                     const CavityParams& params) {
    if (first.magnitude < 0.0 || second.magnitude < 0.0) throw ConfigError("coupling magnitudes must be >= 0");
    if (first.sigma < 0.0 || second.sigma < 0.0) throw ConfigError("coupling uncertainties must be >= 0");

    auto feasible = [&](const CouplingMeasurement& m, const ModeSpec& mode) {
        const double gmax = max_coupling(params, mode);
        if (m.magnitude > gmax + m.sigma) {
            throw InfeasibleMeasurementError("coupling magnitude exceeds the maximum of HG_{" + std::to_string(mode.m) +
                                             "," + std::to_string(mode.n) + "}");
        }
        return std::min(m.magnitude, gmax);
    };
    const double a = feasible(first, first_mode);
    const double b = feasible(second, second_mode);

    const double waist = std::max(first_mode.waist, second_mode.waist);
    const int order = std::max(first_mode.order(), second_mode.order());
    const double extent = (std::sqrt(2.0 * order + 1.0) + 4.0) * waist / std::sqrt(2.0);
    const int res = 401;
    auto coord = [&](int i) { return -extent + 2.0 * extent * i / (res - 1); };

    std::vector<double> ga(static_cast<std::size_t>(res) * res), gb(ga.size());
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            ga[static_cast<std::size_t>(j) * res + i] = coupling(params, first_mode, coord(i), coord(j));
            gb[static_cast<std::size_t>(j) * res + i] = coupling(params, second_mode, coord(i), coord(j));
        }
    }

    const double gscale = params.g0;
    const double h = 1e-7 * waist;
    std::vector<Point> found;

    auto newton = [&](double sa, double sb, Point p) -> std::optional<Point> {
        auto residual = [&](const Point& q) {
            return std::array<double, 2>{coupling(params, first_mode, q.x, q.y) - sa * a,
                                         coupling(params, second_mode, q.x, q.y) - sb * b};
        };
        auto r = residual(p);
        for (int it = 0; it < 100; ++it) {
            const double norm = std::hypot(r[0], r[1]);
            if (norm <= 1e-13 * gscale) break;
            const auto rx1 = residual({p.x + h, p.y}), rx0 = residual({p.x - h, p.y});
            const auto ry1 = residual({p.x, p.y + h}), ry0 = residual({p.x, p.y - h});
            const double j11 = (rx1[0] - rx0[0]) / (2 * h), j12 = (ry1[0] - ry0[0]) / (2 * h);
            const double j21 = (rx1[1] - rx0[1]) / (2 * h), j22 = (ry1[1] - ry0[1]) / (2 * h);
            const double det = j11 * j22 - j12 * j21;
            if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
            const double dx = (j22 * r[0] - j12 * r[1]) / det;
            const double dy = (-j21 * r[0] + j11 * r[1]) / det;
            double lambda = 1.0;
            bool improved = false;
            for (int k = 0; k < 40; ++k) {
                const Point q{p.x - lambda * dx, p.y - lambda * dy};
                const auto rq = residual(q);
                if (std::hypot(rq[0], rq[1]) < norm) {
                    p = q;
                    r = rq;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!improved) break;
        }
        const bool ok_a = std::abs(r[0]) <= std::max(1e-9 * a, 1e-12 * gscale);
        const bool ok_b = std::abs(r[1]) <= std::max(1e-9 * b, 1e-12 * gscale);
        if (!ok_a || !ok_b) return std::nullopt;
        if (std::abs(p.x) > extent || std::abs(p.y) > extent) return std::nullopt;
        return p;
    };

    const double merge = 1e-2 * std::min(first_mode.waist, second_mode.waist);
    for (double sa : {1.0, -1.0}) {
        for (double sb : {1.0, -1.0}) {
            for (int j = 0; j + 1 < res; ++j) {
                for (int i = 0; i + 1 < res; ++i) {
                    const std::size_t c00 = static_cast<std::size_t>(j) * res + i;
                    const std::array<std::size_t, 4> idx{c00, c00 + 1, c00 + res, c00 + res + 1};
                    double lo1 = kInf, hi1 = -kInf, lo2 = kInf, hi2 = -kInf;
                    for (auto k : idx) {
                        lo1 = std::min(lo1, ga[k] - sa * a);
                        hi1 = std::max(hi1, ga[k] - sa * a);
                        lo2 = std::min(lo2, gb[k] - sb * b);
                        hi2 = std::max(hi2, gb[k] - sb * b);
                    }
                    if (!(lo1 <= 0.0 && hi1 >= 0.0 && lo2 <= 0.0 && hi2 >= 0.0)) continue;
                    const Point seed{0.5 * (coord(i) + coord(i + 1)), 0.5 * (coord(j) + coord(j + 1))};
                    const auto root = newton(sa, sb, seed);
                    if (!root) continue;
                    const bool dup = std::any_of(found.begin(), found.end(), [&](const Point& q) {
                        return std::hypot(q.x - root->x, q.y - root->y) < merge;
                    });
                    if (!dup) found.push_back(*root);
                }
            }
        }
    }

    std::sort(found.begin(), found.end(), [](const Point& p, const Point& q) {
        return p.x != q.x ? p.x < q.x : p.y < q.y;
    });
    PositionCandidateSet out;
    out.first = first;
    out.second = second;
    out.candidates = std::move(found);
    out.generic = out.candidates.size() == 8;
    return out;
}

// --- switched records ------------------------------------------------------------------

SwitchedFit fit_switched_transit(const TransitRecord& record, const ModeTable& modes, const CavityParams& params,
                                 const std::string& fit_mode, const std::string& companion_mode,
                                 const FitOptions& options) {
    if (!record.has_mode(fit_mode)) throw ConfigError("record has no bins for mode '" + fit_mode + "'");
    if (!record.has_mode(companion_mode)) throw ConfigError("record has no bins for mode '" + companion_mode + "'");

    SwitchedFit out;
    out.fit_mode = fit_mode;
    out.companion_mode = companion_mode;
    out.fit = fit_transit(record.select_mode(fit_mode), modes, params, options);
    out.companion = record.select_mode(companion_mode);
    const TransitModel companion_model(out.companion.probe_bins(), modes, params, record.rate, options.axial_nodes);
    out.companion_expected = companion_model.expected_counts(out.fit.estimate);
    const auto counts = out.companion.counts();
    out.companion_deviance = poisson_deviance(counts, out.companion_expected);
    return out;
}

}  // namespace hgcav
