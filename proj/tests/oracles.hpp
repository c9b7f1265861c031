#pragma once

// Test-only oracles, kept independent of the library implementation paths
// they are used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

// Expectation of h against N(0,1) by composite Simpson on [-12, 12] with a
// fine grid; independent of the library quadrature code. Adequate for smooth
// or kinked bounded-growth integrands at ~1e-10.
inline double gaussian_expectation(const std::function<double(double)>& h,
                                   int steps_per_unit = 512) {
    const double lo = -12.0, hi = 12.0;
    const int n = static_cast<int>((hi - lo) * steps_per_unit);
    const double dx = (hi - lo) / n;
    auto f = [&](double x) {
        return h(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + i * dx) * ((i % 2) ? 4.0 : 2.0);
    return acc * dx / 3.0;
}

// Monte Carlo expectation with standard error, fixed engine for repeatability.
struct McEstimate {
    double mean;
    double std_error;
};

inline McEstimate mc_gaussian_expectation(const std::function<double(double)>& h,
                                          int n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = h(normal(eng));
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

// Plain power-basis evaluation of He_k from explicitly tabulated monomial
// coefficients (derived by hand for small k); independent of the recurrence.
inline double he_by_hand(int k, double x) {
    switch (k) {
        case 0: return 1.0;
        case 1: return x;
        case 2: return x * x - 1.0;
        case 3: return x * x * x - 3.0 * x;
        case 4: return x * x * x * x - 6.0 * x * x + 3.0;
        case 5: return std::pow(x, 5) - 10.0 * std::pow(x, 3) + 15.0 * x;
        case 6: return std::pow(x, 6) - 15.0 * std::pow(x, 4) + 45.0 * x * x - 15.0;
        default: return std::nan("");
    }
}

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace oracles
