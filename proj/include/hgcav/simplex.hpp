#pragma once

#include <functional>
#include <vector>

namespace hgcav {

struct SimplexOptions {
    int max_evaluations = 10000;
    double f_tolerance = 1e-10;  ///< absolute spread of function values
    double x_tolerance = 1e-9;   ///< max vertex distance from the best vertex
};

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead minimization starting from `start` with per-coordinate initial
/// step `step`. Non-finite objective values are treated as +infinity.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                          const std::vector<double>& step, const SimplexOptions& options = {});

}  // namespace hgcav
