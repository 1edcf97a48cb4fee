#include "hgcav/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hgcav {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                          const std::vector<double>& step, const SimplexOptions& options) {
    const std::size_t dim = start.size();
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> pts(dim + 1, start);
    std::vector<double> vals(dim + 1);
    for (std::size_t i = 0; i < dim; ++i) pts[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= dim; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(dim + 1);
    std::vector<double> centroid(dim), trial(dim), trial2(dim);
    bool converged = false;

    while (evals < options.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[dim - 1];

        double spread = std::abs(vals[worst] - vals[best]);
        double size = 0.0;
        for (std::size_t i = 0; i <= dim; ++i) {
            for (std::size_t k = 0; k < dim; ++k) size = std::max(size, std::abs(pts[i][k] - pts[best][k]));
        }
        if (spread <= options.f_tolerance && size <= options.x_tolerance) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < dim; ++k) centroid[k] += pts[i][k] / static_cast<double>(dim);
        }

        for (std::size_t k = 0; k < dim; ++k) trial[k] = centroid[k] + (centroid[k] - pts[worst][k]);
        const double fr = eval(trial);
        if (fr < vals[best]) {
            for (std::size_t k = 0; k < dim; ++k) trial2[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
            const double fe = eval(trial2);
            if (fe < fr) {
                pts[worst] = trial2;
                vals[worst] = fe;
            } else {
                pts[worst] = trial;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = trial;
            vals[worst] = fr;
            continue;
        }

        // Contraction, outside if the reflection improved on the worst vertex.
        const bool outside = fr < vals[worst];
        for (std::size_t k = 0; k < dim; ++k) {
            trial2[k] = outside ? centroid[k] + 0.5 * (trial[k] - centroid[k])
                                : centroid[k] + 0.5 * (pts[worst][k] - centroid[k]);
        }
        const double fc = eval(trial2);
        if (fc < std::min(fr, vals[worst])) {
            pts[worst] = trial2;
            vals[worst] = fc;
            continue;
        }

        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < dim; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
            vals[i] = eval(pts[i]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    return {pts[best], vals[best], evals, converged};
}

}  // namespace hgcav
