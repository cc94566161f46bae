#pragma once

#include <functional>
#include <vector>

namespace wxd {

struct NelderMeadOptions {
    int max_evaluations = 20000;
    double f_tolerance = 1e-10;  // absolute spread of simplex values
    double x_tolerance = 1e-8;   // max vertex distance from the best vertex
    double initial_step = 0.1;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Minimize f with the adaptive-coefficient Nelder-Mead simplex (Gao & Han).
/// Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, const NelderMeadOptions& options = {});

}  // namespace wxd
