#pragma once

// Ensemble statistics: L_m norms with jackknife standard errors, sample
// moments, and least-squares line fits used by the rate/decay estimators.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace sheetsew {

inline double mean(std::span<const double> xs)
{
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs)
{
    if (xs.size() < 2) throw std::invalid_argument("sample_variance: need >= 2 samples");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double stderr_of_mean(std::span<const double> xs)
{
    return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

/// (mean |x|^m)^{1/m} over the ensemble.
template <class T>
double lm_norm(std::span<const T> xs, int m)
{
    if (xs.empty()) throw std::invalid_argument("lm_norm: empty ensemble");
    if (m < 1) throw std::invalid_argument("lm_norm: m >= 1 required");
    double acc = 0.0;
    for (const T& x : xs) acc += std::pow(std::abs(x), m);
    return std::pow(acc / static_cast<double>(xs.size()), 1.0 / m);
}

struct Estimate {
    double value = 0.0;
    double stderr = 0.0;
};

/// Block-jackknife standard error of an arbitrary ensemble statistic.
/// `stat` maps a vector of retained samples to a scalar.
template <class T, class Stat>
Estimate jackknife(std::span<const T> xs, Stat&& stat, int blocks = 20)
{
    const std::size_t n = xs.size();
    if (n < 4) throw std::invalid_argument("jackknife: ensemble too small");
    blocks = static_cast<int>(std::min<std::size_t>(blocks, n));
    std::vector<T> retained;
    retained.reserve(n);
    std::vector<double> leave_out(blocks);
    for (int b = 0; b < blocks; ++b) {
        retained.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (static_cast<int>(i % blocks) != b) retained.push_back(xs[i]);
        leave_out[b] = stat(std::span<const T>(retained));
    }
    const double full = stat(xs);
    double m = 0.0;
    for (double v : leave_out) m += v;
    m /= blocks;
    double var = 0.0;
    for (double v : leave_out) var += (v - m) * (v - m);
    var *= static_cast<double>(blocks - 1) / blocks;
    return {full, std::sqrt(var)};
}

template <class T>
Estimate lm_norm_jackknife(std::span<const T> xs, int m, int blocks = 20)
{
    return jackknife(xs, [m](std::span<const T> ys) { return lm_norm(ys, m); }, blocks);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y = a + b x with residual-based slope error.
inline LineFit linear_fit(std::span<const double> xs, std::span<const double> ys)
{
    const std::size_t n = xs.size();
    if (n != ys.size() || n < 2) throw std::invalid_argument("linear_fit: need >= 2 points");
    const double mx = mean(xs), my = mean(ys);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
            ss_res += r * r;
        }
        fit.slope_stderr = std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

}  // namespace sheetsew
