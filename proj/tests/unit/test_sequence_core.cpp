#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "seqflow/numerics.hpp"
#include "seqflow/sequence_core.hpp"

using namespace seqflow;

TEST_CASE("build_eigenvalues") {
    const auto l = build_eigenvalues({2.0, 4});
    REQUIRE(l.size() == 4);
    CHECK(l[0] == 1.0);
    CHECK(l[1] == 0.25);
    CHECK(l[2] == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
    CHECK(l[3] == 0.0625);

    const auto one = build_eigenvalues({1.5, 1});
    REQUIRE(one.size() == 1);
    CHECK(one[0] == 1.0);

    CHECK_THROWS_AS(build_eigenvalues({1.0, 10}), std::invalid_argument);
    CHECK_THROWS_AS(build_eigenvalues({0.5, 10}), std::invalid_argument);
    CHECK_THROWS_AS(build_eigenvalues({2.0, 0}), std::invalid_argument);
}

TEST_CASE("eigenvalue tail of gamma = 3 stays under the integral bound") {
    const auto l = build_eigenvalues({3.0, 100000});
    std::vector<double> tail(l.begin() + 10000, l.end());
    CHECK(pairwise_sum(tail) < 5e-9);
    for (std::size_t j = 1; j < l.size(); ++j) REQUIRE(l[j] < l[j - 1]);
}

TEST_CASE("build_signal power law") {
    const auto t = build_signal(SignalSpec::power_law(1.0, 1.0), 5);
    const std::vector<double> expect{1.0, 0.5, 1.0 / 3.0, 0.25, 0.2};
    for (std::size_t j = 0; j < 5; ++j) CHECK(t[j] == doctest::Approx(expect[j]).epsilon(1e-15));

    const auto m = build_signal(SignalSpec::power_law(1.0, 2.0), 10);
    for (std::size_t j = 0; j < 10; ++j) {
        if (j == 0) CHECK(m[j] == 1.0);
        else if (j == 3) CHECK(m[j] == 0.5);
        else if (j == 8) CHECK(m[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        else CHECK(m[j] == 0.0);
    }
}

TEST_CASE("sorted power-law magnitudes are exactly j^{-(p+1)/2}") {
    for (double q : {1.0, 1.5, 2.0, 2.7}) {
        const double p = 0.6;
        auto t = build_signal(SignalSpec::power_law(p, q), 20000);
        std::vector<double> nz;
        for (double v : t)
            if (v != 0.0) nz.push_back(std::abs(v));
        std::sort(nz.begin(), nz.end(), std::greater<>());
        for (std::size_t j = 0; j < nz.size(); ++j)
            REQUIRE(nz[j] == std::pow(static_cast<double>(j + 1), -(p + 1.0) / 2.0));
    }
}

TEST_CASE("index map is injective and close to j^q for non-integer q") {
    const auto idx = power_law_index_map(1.3, 100000);
    std::vector<std::size_t> s = idx;
    std::sort(s.begin(), s.end());
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    for (std::size_t j = 1; j <= idx.size(); ++j) {
        const double target = std::round(std::pow(static_cast<double>(j), 1.3));
        REQUIRE(static_cast<double>(idx[j - 1]) >= target);
        REQUIRE(static_cast<double>(idx[j - 1]) <= target + 2.0);
    }
}

TEST_CASE("sparse and explicit placement") {
    const auto s = build_signal(SignalSpec::sparse({3, 7}, 1.0), 8);
    CHECK(s == std::vector<double>{0, 0, 1, 0, 0, 0, 1, 0});
    CHECK_THROWS_AS(SignalSpec::sparse({3, 3}, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(SignalSpec::sparse({0, 2}, 1.0).validate(), std::invalid_argument);
    const auto e = build_signal(SignalSpec::explicit_values({0.5, -0.25}), 4);
    CHECK(e == std::vector<double>{0.5, -0.25, 0, 0});
    CHECK_THROWS_AS(SignalSpec::power_law(0.0, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(SignalSpec::power_law(1.0, 0.9).validate(), std::invalid_argument);
}

TEST_CASE("signal tail energy matches the omitted components") {
    const auto spec = SignalSpec::power_law(1.0, 2.0);
    const auto full = build_signal(spec, 4000000);
    const auto head = build_signal(spec, 1000);
    double omitted = 0.0;
    for (std::size_t j = 1000; j < full.size(); ++j) omitted += full[j] * full[j];
    // the part beyond 4e6 is the tail of sum j^{-2} from j = 2001
    const double beyond = signal_tail_energy(spec, 4000000);
    CHECK(signal_tail_energy(spec, 1000) == doctest::Approx(omitted + beyond).epsilon(1e-12));
    CHECK(signal_tail_energy(SignalSpec::sparse({5, 20}, 2.0), 10) == 4.0);
    (void)head;
}

TEST_CASE("sample_instance") {
    const auto spec = SignalSpec::power_law(1.0, 2.0);
    const EigenSchedule sched{2.0, 1000};
    const auto noiseless = sample_instance(spec, sched, 0.0, 7);
    CHECK(noiseless.z == noiseless.theta_star);

    const auto a = sample_instance(spec, sched, 0.1, 42);
    const auto b = sample_instance(spec, sched, 0.1, 42);
    CHECK(a.z == b.z);
    const auto c = sample_instance(spec, sched, 0.1, 43);
    CHECK(a.z != c.z);

    std::vector<double> diff(a.z.size());
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = a.z[j] - a.theta_star[j];
    CHECK(std::abs(mean(diff)) <= 5.0 * 0.1 / std::sqrt(1000.0));

    CHECK_THROWS_AS(sample_instance(spec, sched, -1.0, 1), std::invalid_argument);
}

TEST_CASE("unit noise has unit sample variance") {
    const auto inst = sample_instance(SignalSpec::explicit_values({}), {2.0, 100000}, 1.0, 2024);
    const double v = sample_std(inst.z);
    CHECK(v * v >= 0.98);
    CHECK(v * v <= 1.02);
}

TEST_CASE("noise is independent of evaluation order") {
    const std::vector<double> theta(64, 0.0);
    const auto z = add_noise(theta, 1.0, 99);
    for (std::size_t len : {1, 7, 33, 64}) {
        const std::vector<double> head(len, 0.0);
        const auto zh = add_noise(head, 1.0, 99);
        for (std::size_t j = 0; j < len; ++j) REQUIRE(zh[j] == z[j]);
    }
}

TEST_CASE("structure_report examples") {
    const auto sparse = build_signal(SignalSpec::sparse({2, 5, 9, 11}, 1.0), 20);
    const auto r = structure_report(sparse, 0.5);
    CHECK(r.phi_of_delta == 4.0);
    CHECK(r.psi_of_delta == 0.0);
    CHECK(r.jsig == std::vector<std::size_t>{2, 5, 9, 11});
    CHECK(r.max_jsig == 11);

    const auto harmonic = build_signal(SignalSpec::power_law(1.0, 1.0), 10000000);
    CHECK(structure_report(harmonic, 0.1).phi_of_delta == 10.0);
    // independent value: pi^2/6 - 1 - 1/4, less the tail beyond 10^7 (about 1e-7)
    CHECK(structure_report(harmonic, 0.5).psi_of_delta == doctest::Approx(0.394934066848226 - 1e-7).epsilon(1e-9));

    const auto zero = structure_report(std::vector<double>(10, 0.0), 0.3);
    CHECK(zero.phi_of_delta == 0.0);
    CHECK(zero.psi_of_delta == 0.0);
    CHECK(zero.max_jsig == 0);
    CHECK(std::isnan(zero.kappa_hat));
}

TEST_CASE("phi non-increasing and psi non-decreasing in delta") {
    const auto t = build_signal(SignalSpec::power_law(2.0, 1.5), 50000);
    double norm2 = 0.0;
    for (double v : t) norm2 += v * v;
    double prev_phi = INFINITY, prev_psi = -INFINITY;
    for (double d = 1e-4; d < 2.0; d *= 1.3) {
        const auto r = structure_report(t, d);
        CHECK(r.phi_of_delta <= prev_phi);
        CHECK(r.psi_of_delta >= prev_psi);
        CHECK(r.psi_of_delta <= norm2 * (1 + 1e-12));
        prev_phi = r.phi_of_delta;
        prev_psi = r.psi_of_delta;
    }
}

TEST_CASE("phi and psi do not depend on the index map") {
    const std::size_t N = 1000000;
    const auto a = build_signal(SignalSpec::power_law(1.0, 1.0), N);
    const auto b = build_signal(SignalSpec::power_law(1.0, 2.0), N);
    // compare over the magnitudes both vectors hold: the first 1000 values of a
    std::vector<double> a_head(a.begin(), a.begin() + 1000);
    for (double d : {0.5, 0.1, 0.03, 0.0101}) {
        const auto ra = structure_report(a_head, d);
        const auto rb = structure_report(b, d);
        CHECK(ra.phi_of_delta == rb.phi_of_delta);
        CHECK(ra.psi_of_delta == doctest::Approx(rb.psi_of_delta).epsilon(1e-12));
    }
}

TEST_CASE("ideal-risk bracketing at delta = eps") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> t(200);
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = u(gen) / (1.0 + static_cast<double>(j) / 10.0);
        const double eps = 0.01 + 0.3 * (u(gen) + 1.0) / 2.0;
        const auto r = structure_report(t, eps);
        double m = 0.0;
        for (double v : t) m += std::min(eps * eps, v * v);
        const double mid = eps * eps * r.phi_of_delta + r.psi_of_delta;
        CHECK(mid >= m * (1 - 1e-12));
        CHECK(mid <= 4.0 * m * (1 + 1e-12));
    }
}

TEST_CASE("phi_psi_rate_check") {
    std::vector<double> grid;
    for (int k = 0; k <= 8; ++k) grid.push_back(std::pow(10.0, -3.0 + 0.25 * k));
    const auto e1 = phi_psi_rate_check(SignalSpec::power_law(1.0, 2.0), grid);
    CHECK(e1.phi_exponent == doctest::Approx(-1.0).epsilon(0.05));
    CHECK(e1.psi_exponent == doctest::Approx(1.0).epsilon(0.05));
    const auto e3 = phi_psi_rate_check(SignalSpec::power_law(3.0, 1.0), grid);
    CHECK(std::abs(e3.phi_exponent + 0.5) <= 0.05);

    const std::vector<double> two{0.001, 0.1};
    CHECK_THROWS_AS(phi_psi_rate_check(SignalSpec::power_law(1.0, 1.0), two), std::invalid_argument);
    const std::vector<double> narrow{0.01, 0.02, 0.05};
    CHECK_THROWS_AS(phi_psi_rate_check(SignalSpec::power_law(1.0, 1.0), narrow), std::invalid_argument);
}

TEST_CASE("kappa_hat diagnostic") {
    const auto t = build_signal(SignalSpec::power_law(1.0, 2.0), 100000);
    const auto r = structure_report(t, 0.01);
    // |theta*_{j^2}| = 1/j >= 0.01 up to j = 100, so max J_sig = 10^4
    CHECK(r.max_jsig == 10000);
    CHECK(r.kappa_hat == doctest::Approx(2.0).epsilon(1e-12));
}
