#include "hydroscale/stats.hpp"

#include "hydroscale/core.hpp"

#include <cmath>

namespace hydroscale {

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

MeanSE mean_se(std::span<const double> x) {
    MeanSE r;
    r.n = x.size();
    if (x.empty()) return r;
    r.mean = pairwise_sum(x) / static_cast<double>(x.size());
    if (x.size() < 2) return r;
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (x[i] - r.mean) * (x[i] - r.mean);
    const double var = pairwise_sum(dev) / static_cast<double>(x.size() - 1);
    r.se = std::sqrt(var / static_cast<double>(x.size()));
    return r;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "linear_fit: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "linear_fit: abscissae must not all coincide");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return f;
}

LinearFit loglog_fit(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    return linear_fit(lx, ly);
}

double extrapolate_to_zero(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && !x.empty(), "extrapolate_to_zero: mismatched input");
    std::vector<double> p(y.begin(), y.end());
    const std::size_t n = x.size();
    for (std::size_t level = 1; level < n; ++level)
        for (std::size_t i = 0; i + level < n; ++i)
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i]);
    return p[0];
}

}  // namespace hydroscale
