#include "seqflow/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace seqflow {

namespace {

double pairwise_sum_impl(const double* data, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_impl(values.data(), values.size());
}

double mean(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean: empty input");
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - m) * (values[i] - m);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
}

LinearFit ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("ols_fit: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("ols_fit: need at least two points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("ols_fit: x values are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

std::vector<double> geometric_grid(double first, double last, double ratio) {
    if (!(first > 0.0) || !(last >= first) || !(ratio > 1.0))
        throw std::invalid_argument("geometric_grid: need 0 < first <= last and ratio > 1");
    std::vector<double> grid;
    for (double t = first; t < last; t *= ratio) grid.push_back(t);
    if (grid.empty() || grid.back() < last) grid.push_back(last);
    return grid;
}

double zeta_tail(double s, std::size_t m) {
    if (!(s > 1.0)) throw std::invalid_argument("zeta_tail: s must exceed 1");
    if (m == 0) throw std::invalid_argument("zeta_tail: m must be positive");
    constexpr std::size_t kHead = 100;
    double head = 0.0;
    std::size_t j = m;
    for (; j < kHead; ++j) head += std::pow(static_cast<double>(j), -s);
    // Euler-Maclaurin from M = j; the next omitted term is O(M^{-s-5}).
    const double M = static_cast<double>(j);
    const double tail = std::pow(M, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(M, -s) +
                        s * std::pow(M, -s - 1.0) / 12.0 -
                        s * (s + 1.0) * (s + 2.0) * std::pow(M, -s - 3.0) / 720.0;
    return head + tail;
}

}  // namespace seqflow
