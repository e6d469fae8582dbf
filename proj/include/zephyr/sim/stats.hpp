#pragma once

#include <cstdint>
#include <vector>

namespace zephyr::sim {

/// Pearson chi-square statistic against a uniform expectation, and its p-value
/// with counts.size() - 1 degrees of freedom.
struct ChiSquare {
    double statistic = 0.0;
    double p_value = 0.0;
};
ChiSquare chi_square_uniform(const std::vector<std::uint64_t>& counts);

/// Ordinary least squares y = slope * x + intercept.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace zephyr::sim
