#pragma once

#include <span>
#include <vector>

namespace hydroscale {

/// Fixed-order pairwise summation: the result depends only on the input order.
double pairwise_sum(std::span<const double> x);

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;  ///< standard error of the mean (sample sd / sqrt(n))
    std::size_t n = 0;
};

MeanSE mean_se(std::span<const double> x);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of log y against log x; entries with y <= 0 are skipped.
LinearFit loglog_fit(std::span<const double> x, std::span<const double> y);

/// Polynomial extrapolation to x = 0 through all points (Neville).
double extrapolate_to_zero(std::span<const double> x, std::span<const double> y);

}  // namespace hydroscale
