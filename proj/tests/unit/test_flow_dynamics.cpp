#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "seqflow/error.hpp"
#include "seqflow/flow_dynamics.hpp"

using namespace seqflow;

namespace {

std::vector<double> linear_times(double t_max, int count) {
    std::vector<double> out;
    for (int i = 0; i <= count; ++i) out.push_back(t_max * i / count);
    return out;
}

IntegratorConfig rk4(double eta, std::vector<double> times) {
    IntegratorConfig cfg;
    cfg.eta = eta;
    cfg.method = StepMethod::rk4;
    cfg.record_times = std::move(times);
    return cfg;
}

}  // namespace

TEST_CASE("vanilla_estimate") {
    const std::vector<double> z{1.0, -2.0, 0.5};
    const std::vector<double> l{1.0, 0.5, 0.25};
    for (double v : vanilla_estimate(z, l, 0.0)) CHECK(v == 0.0);
    const auto inf = vanilla_estimate(std::vector<double>{1.0}, std::vector<double>{1.0}, 1e9);
    CHECK(inf[0] == 1.0);
    const auto half = vanilla_estimate(std::vector<double>{1.0}, std::vector<double>{1.0}, std::log(2.0));
    CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(vanilla_estimate(z, l, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(vanilla_estimate(z, std::vector<double>{1.0}, 1.0), std::invalid_argument);
}

TEST_CASE("theta_tilde") {
    CHECK(theta_tilde(1.0, 1.0, 0.0) == 0.0);
    CHECK(theta_tilde(1.0, 1.0, 1e6) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(theta_tilde(1.0, 1.0, 1.0) == doctest::Approx(0.8641644977691128).epsilon(1e-14));
    CHECK(theta_tilde(1.0, 1.0, 1.0 / std::sqrt(2.0)) == doctest::Approx(0.7099247707082952).epsilon(1e-14));
    CHECK(theta_tilde(1.0, -1.0, 1.0) == -theta_tilde(1.0, 1.0, 1.0));
    // exponent far past 300
    const double big = theta_tilde(1e-3, 5.0, 1e4);
    CHECK(std::isfinite(big));
    CHECK(big == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(theta_tilde(0.5, 0.0, 3.0) == 0.0);
    CHECK_THROWS_AS(theta_tilde(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("twolayer closed form") {
    CHECK(twolayer_theta(1.0, 1.0, 1.0) == doctest::Approx(0.7378497376467392).epsilon(1e-12));
    CHECK(twolayer_theta(1.0, -1.0, 0.5) == doctest::Approx(-0.4283917463603096).epsilon(1e-12));
    CHECK(twolayer_theta(0.25, 2.0, 0.3) == doctest::Approx(0.1778266322461200).epsilon(1e-12));
}

TEST_CASE("integrate_twolayer examples") {
    const auto traj = integrate_twolayer(1.0, 1.0, rk4(1e-3, {0.25, 0.5, 1.0}));
    REQUIRE(traj.size() == 3);
    const double th = traj.back().theta();
    CHECK(th >= 0.7099247707082952);
    CHECK(th <= 0.8641644977691128);
    CHECK(th == doctest::Approx(0.7378497376467392).epsilon(1e-10));

    const auto zero = integrate_twolayer(0.3, 0.0, rk4(1e-2, linear_times(50.0, 10)));
    for (const auto& s : zero) {
        CHECK(s.theta() == 0.0);
        CHECK(s.eigen_term() == doctest::Approx(std::sqrt(0.3)).epsilon(1e-15));
    }

    const auto pos = integrate_twolayer(1.0, 1.0, rk4(1e-3, linear_times(3.0, 30)));
    const auto neg = integrate_twolayer(1.0, -1.0, rk4(1e-3, linear_times(3.0, 30)));
    for (std::size_t i = 0; i < pos.size(); ++i) {
        CHECK(neg[i].theta() == -pos[i].theta());
        CHECK(neg[i].beta == -pos[i].beta);
    }
}

TEST_CASE("two-layer sandwich and bracket on random parameters") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const double lambda = std::pow(10.0, -3.0 * u(gen));
        const double z = (u(gen) < 0.5 ? -1.0 : 1.0) * std::pow(10.0, -2.0 + 3.0 * u(gen));
        const double t_max = 5.0 / lambda * u(gen) + 0.1;
        const double lmax = stability_constant(lambda, std::abs(z), 1.0, 0);
        const auto traj = integrate_twolayer(lambda, z, rk4(0.05 / lmax, linear_times(t_max, 20)));
        double prev = 0.0;
        for (const auto& s : traj) {
            const double th = std::abs(s.theta());
            const double lo = std::abs(theta_tilde(lambda, z, s.t / std::sqrt(2.0)));
            const double hi = std::abs(theta_tilde(lambda, z, s.t));
            CHECK(th >= lo - 1e-6);
            CHECK(th <= hi + 1e-6);
            CHECK(th >= prev - 1e-12);
            CHECK(th <= std::abs(z) * (1 + 1e-12));
            CHECK(s.beta * s.beta <= th * (1 + 1e-9) + 1e-15);
            CHECK(th <= s.a * s.a * (1 + 1e-9));
            prev = th;
        }
    }
}

TEST_CASE("integrate_deep frozen reference values") {
    SUBCASE("D=1, lambda=0.01, b0=0.1, z=1") {
        const std::vector<double> t{2, 4, 6, 8, 10, 20};
        const std::vector<double> theta{0.00021101564161731920, 0.00049820744210677193, 0.0010035171436075183,
                                        0.0021166610542580218,  0.0053007855455397312,  0.99999973545797394};
        const std::vector<double> eig{0.010410826877121760, 0.011786650513130402, 0.014675734874097111,
                                      0.020579113939632018, 0.034126560885253872, 1.0033442927761368};
        const auto traj = integrate_deep(0.01, 0.1, 1, 1.0, rk4(1e-3, t));
        std::vector<double> beta(t.size());
        const FlowParams fp{0.01, 1.0, 1, 0.1};
        solve_flow_at(fp, t, beta);
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(traj[i].theta() == doctest::Approx(theta[i]).epsilon(1e-8));
            CHECK(traj[i].eigen_term() == doctest::Approx(eig[i]).epsilon(1e-8));
            CHECK(theta_from_beta(fp, beta[i]) == doctest::Approx(theta[i]).epsilon(1e-7));
        }
        // convergence-stage bound on beta for D = 1: beta <= z^{1/3}
        const auto late = integrate_deep(0.01, 0.1, 1, 1.0, rk4(1e-2, {200.0}));
        CHECK(late.back().theta() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(late.back().beta <= 1.0);
    }
    SUBCASE("D=2, lambda=0.04, b0=0.3, z=0.5") {
        const std::vector<double> t{5, 10, 15, 20, 30};
        const std::vector<double> theta{0.00089071946247648737, 0.0024443121023255835, 0.0071476628307452251,
                                        0.044299762429161515, 0.49999975871357148};
        const std::vector<double> eig{0.019341536521707909, 0.024541375067013731, 0.040554098612374712,
                                      0.12915566362187704, 0.73098572767692783};
        const auto traj = integrate_deep(0.04, 0.3, 2, 0.5, rk4(1e-3, t));
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(traj[i].theta() == doctest::Approx(theta[i]).epsilon(1e-8));
            CHECK(traj[i].eigen_term() == doctest::Approx(eig[i]).epsilon(1e-8));
        }
    }
    SUBCASE("negative z") {
        const auto traj = integrate_deep(0.09, 0.5, 1, -0.7, rk4(1e-3, {5.0}));
        CHECK(traj[0].theta() == doctest::Approx(-0.54521531401204635).epsilon(1e-9));
        CHECK(traj[0].eigen_term() == doctest::Approx(0.72740946776538323).epsilon(1e-9));
    }
}

TEST_CASE("integrate_deep invariants") {
    const auto zero = integrate_deep(0.2, 0.4, 3, 0.0, rk4(1e-2, linear_times(100.0, 10)));
    for (const auto& s : zero) {
        CHECK(s.a == doctest::Approx(std::sqrt(0.2)).epsilon(1e-15));
        CHECK(s.b == 0.4);
        CHECK(s.beta == 0.0);
        CHECK(s.eigen_term() == doctest::Approx(std::sqrt(0.2) * 0.064).epsilon(1e-14));
    }

    for (int D : {1, 2, 3}) {
        const double lambda = 0.05, b0 = 0.3, z = 1.4;
        const double eta = default_step(lambda, z, b0, D);
        const auto traj = integrate_deep(lambda, b0, D, z, rk4(eta, linear_times(200.0, 200)));
        for (std::size_t i = 1; i < traj.size(); ++i) {
            CHECK(traj[i].a >= traj[i - 1].a - 1e-12);
            CHECK(traj[i].b >= traj[i - 1].b - 1e-12);
            CHECK(traj[i].beta >= traj[i - 1].beta - 1e-12);
            CHECK(traj[i].eigen_term() >= traj[i - 1].eigen_term() - 1e-12);
            CHECK(traj[i].theta() <= z * (1 + 1e-12));
            const auto d = conservation_drift(traj[i]);
            CHECK(d.a_beta <= 1e-6);
            CHECK(d.b_beta <= 1e-6);
        }
        const auto neg = integrate_deep(lambda, b0, D, -z, rk4(eta, linear_times(200.0, 200)));
        for (std::size_t i = 0; i < traj.size(); ++i) CHECK(neg[i].theta() == -traj[i].theta());
    }
}

TEST_CASE("euler step halving is first order") {
    const double lambda = 0.04, b0 = 0.3, z = 1.0;
    const auto times = linear_times(40.0, 40);
    auto run = [&](double eta) {
        IntegratorConfig cfg;
        cfg.eta = eta;
        cfg.method = StepMethod::euler;
        cfg.record_times = times;
        cfg.drift_tol = 1.0;
        return integrate_deep(lambda, b0, 1, z, cfg);
    };
    const auto ref = integrate_deep(lambda, b0, 1, z, rk4(1e-3, times));
    const double eta = 0.02;
    const auto coarse = run(eta);
    const auto fine = run(eta / 4);
    double err_c = 0, err_f = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        err_c = std::max(err_c, std::abs(coarse[i].theta() - ref[i].theta()));
        err_f = std::max(err_f, std::abs(fine[i].theta() - ref[i].theta()));
    }
    CHECK(err_c > 0.0);
    CHECK(err_c / err_f >= 3.0);
}

TEST_CASE("integrator guards") {
    IntegratorConfig bad = rk4(1.0, {1.0});
    CHECK_THROWS_AS(integrate_deep(0.5, 1.0, 1, 2.0, bad), std::invalid_argument);

    IntegratorConfig tight;
    tight.eta = 0.05 / stability_constant(0.5, 1.0, 0.8, 1);
    tight.method = StepMethod::euler;
    tight.record_times = {20.0};
    tight.drift_tol = 1e-15;
    CHECK_THROWS_AS(integrate_deep(0.5, 0.8, 1, 1.0, tight), NumericalAbort);

    CHECK_THROWS_AS(integrate_deep(0.5, 0.8, 0, 1.0, rk4(1e-3, {1.0})), std::invalid_argument);
    CHECK_THROWS_AS(integrate_twolayer(0.0, 1.0, rk4(1e-3, {1.0})), std::invalid_argument);
    CHECK_THROWS_AS(integrate_twolayer(1.0, 1.0, rk4(1e-3, {2.0, 1.0})), std::invalid_argument);
}

TEST_CASE("escape_time_bounds") {
    const auto a = escape_time_bounds(0.25, 1.0, 1, 1.0);
    CHECK(a.T1_lower == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a.T2_lower == doctest::Approx(1.0).epsilon(1e-15));
    const auto b = escape_time_bounds(0.01, 1.0, 1, 1.0);
    REQUIRE(b.T12_lower);
    CHECK(*b.T12_lower == doctest::Approx(1.6512925464970228).epsilon(1e-14));
    REQUIRE(b.Tsig_upper);
    CHECK(*b.Tsig_upper > 0.0);
    // lambda^{1/2} above b0 / sqrt(D): no T12
    CHECK_FALSE(escape_time_bounds(0.5, 0.5, 2, 1.0).T12_lower);
    CHECK_FALSE(escape_time_bounds(0.01, 0.5, 1, 0.0).Tsig_upper);
}

TEST_CASE("noise-phase bound on a grid") {
    for (double z : {0.05, 0.3, 1.0}) {
        const double lambda = 1e-3, b0 = 0.3;
        const int D = 1;
        const auto bounds = escape_time_bounds(lambda, b0, D, z);
        const double t_end = std::min(bounds.T1_lower, bounds.T2_lower);
        const auto traj = integrate_deep(lambda, b0, D, z, rk4(1e-3, linear_times(t_end, 50)));
        for (const auto& s : traj)
            CHECK(std::abs(s.theta()) <= std::pow(2.0, D + 1) * lambda * std::pow(b0, 2 * D) * z * s.t * (1 + 1e-9));
    }
}

TEST_CASE("eigen_term") {
    const FlowParams p{0.36, 1.0, 2, 0.5};
    CHECK(eigen_term(initial_state(p)) == doctest::Approx(0.6 * 0.25).epsilon(1e-15));

    const FlowParams p0{1.0, 1.0, 0, 1.0};
    std::vector<double> beta(1);
    solve_flow_at(p0, std::vector<double>{60.0}, beta);
    const auto s = state_from_beta(p0, beta[0], 60.0);
    CHECK(s.theta() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eigen_term(s) == doctest::Approx(1.272019649514022).epsilon(1e-12));
}

TEST_CASE("make_schedule") {
    CHECK(make_schedule(0.01, 0).t_stop == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(make_schedule(0.01, 0).b0 == 1.0);
    const auto s1 = make_schedule(0.01, 1);
    CHECK(s1.b0 == doctest::Approx(0.21544346900318837).epsilon(1e-14));
    CHECK(s1.t_stop == doctest::Approx(464.15888336127789).epsilon(1e-14));
    CHECK(std::abs(make_schedule(0.01, 100).t_stop - 1e4) <= 1e3);
    CHECK_THROWS_AS(make_schedule(1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(0.0, 1), std::invalid_argument);
}

TEST_CASE("adaptive solver agrees with fixed step rk4") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int D = 1 + trial % 3;
        const double lambda = std::pow(10.0, -2.0 * u(gen));
        const double b0 = 0.2 + 0.6 * u(gen);
        const double z = (u(gen) - 0.5) * 4.0;
        const auto times = linear_times(30.0, 15);
        const auto traj = integrate_deep(lambda, b0, D, z, rk4(1e-3, times));
        const FlowParams fp{lambda, z, D, b0};
        std::vector<double> beta(times.size());
        solve_flow_adaptive_at(fp, times, beta);
        for (std::size_t i = 0; i < times.size(); ++i)
            CHECK(theta_from_beta(fp, beta[i]) == doctest::Approx(traj[i].theta()).epsilon(1e-7));
    }
}

TEST_CASE("hitting_time") {
    const FlowParams fp{0.01, 1.0, 1, 0.1};
    const auto th = hitting_time(fp, 0.5, 1000.0);
    REQUIRE(th);
    std::vector<double> beta(1);
    solve_flow_at(fp, std::vector<double>{*th}, beta);
    CHECK(theta_from_beta(fp, beta[0]) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(*th <= *escape_time_bounds(0.01, 0.1, 1, 1.0).Tsig_upper);
    CHECK_FALSE(hitting_time(fp, 0.5, 1.0));
}

TEST_CASE("trajectory CSV") {
    const auto traj = integrate_deep(0.01, 0.1, 1, 1.0, rk4(1e-2, {0.0, 1.0}));
    std::ostringstream os;
    write_trajectory_csv(os, 7, traj);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "component_index,t,theta,a,b,beta,eigen_term");
    std::getline(in, line);
    CHECK(line.rfind("7,0,", 0) == 0);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 1);
}
