// SPDX-License-Identifier: Apache-2.0
//
// Small statistics helpers for the report stage: linear-interpolation
// percentiles (the convention most numeric packages default to) and
// mean / standard-error reduction across drops.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cfmm {

// q-th percentile, q in [0, 100], by linear interpolation between order
// statistics: rank h = (n-1) * q/100, value = x_(lo) + frac * (x_(lo+1) -
// x_(lo)). Matches numpy.percentile's default. Takes its input by value
// and sorts the copy.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 100.0))
        throw std::invalid_argument("percentile level must lie in [0, 100]");
    std::sort(v.begin(), v.end());
    const double h = (double(v.size()) - 1.0) * q / 100.0;
    const std::size_t lo = std::size_t(h);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - double(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of an empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

// Standard error of the mean with the n-1 variance denominator; zero for a
// single observation (no spread information, not an error).
inline double std_error_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("standard error of an empty sample");
    if (v.size() == 1) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / double(v.size() - 1) / double(v.size()));
}

}  // namespace cfmm
