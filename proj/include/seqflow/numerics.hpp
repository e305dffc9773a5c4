#ifndef SEQFLOW_NUMERICS_HPP
#define SEQFLOW_NUMERICS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace seqflow {

// Pairwise (cascade) summation; the result depends only on the element order.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

// Sample standard deviation with n-1 denominator; 0 for fewer than two values.
double sample_std(std::span<const double> values);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Ordinary least squares y = intercept + slope * x. Needs at least two distinct x.
LinearFit ols_fit(std::span<const double> x, std::span<const double> y);

// Geometric grid first, first*ratio, ... up to and including the first point >= last.
std::vector<double> geometric_grid(double first, double last, double ratio);

// sum_{j >= m} j^{-s} for s > 1, m >= 1 (direct head plus Euler-Maclaurin tail).
double zeta_tail(double s, std::size_t m);

}  // namespace seqflow

#endif  // SEQFLOW_NUMERICS_HPP
