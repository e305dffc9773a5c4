#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "seqflow/flow_dynamics.hpp"
#include "seqflow/kernel_bridge.hpp"

using namespace seqflow;

namespace {

FeatureSystem identity_system(const std::vector<double>& z, const std::vector<double>& lambdas) {
    FeatureSystem sys;
    const auto M = static_cast<Eigen::Index>(z.size());
    sys.G = Eigen::MatrixXd::Identity(M, M);
    sys.c = Eigen::Map<const Eigen::VectorXd>(z.data(), M);
    sys.y2 = sys.c.squaredNorm();
    sys.lambdas = lambdas;
    return sys;
}

const TargetFn zero_target = [](std::span<const double>) { return 0.0; };

}  // namespace

TEST_CASE("fourier_index_order") {
    const auto one = fourier_index_order(2, 2.0, 1);
    REQUIRE(one.index_list.size() == 1);
    CHECK(one.index_list[0].label() == "cos 0 0");
    CHECK(one.index_list[0].lambda == 1.0);

    const auto five = fourier_index_order(2, 2.0, 5);
    std::vector<std::string> labels;
    for (const auto& e : five.index_list) labels.push_back(e.label());
    CHECK(labels == std::vector<std::string>{"cos 0 0", "cos 0 1", "sin 0 1", "cos 1 0", "sin 1 0"});
    for (std::size_t k = 1; k < 5; ++k) CHECK(five.index_list[k].lambda == 0.25);

    const auto d1 = fourier_index_order(1, 1.0, 3);
    CHECK(d1.lambdas() == std::vector<double>{1.0, 0.5, 0.5});

    CHECK_THROWS_AS(fourier_index_order(2, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(fourier_index_order(2, 2.0, 0), std::invalid_argument);
    CHECK(default_basis_size(2, 2.0) == 306);

    const auto big = fourier_index_order(3, 2.0, 400);
    for (std::size_t k = 1; k < big.index_list.size(); ++k)
        REQUIRE(big.index_list[k].lambda <= big.index_list[k - 1].lambda);
}

TEST_CASE("basis is orthonormal under the uniform measure") {
    const auto basis = fourier_index_order(1, 1.0, 9);
    const int Q = 64;  // exact for trigonometric polynomials of degree < Q on the uniform grid
    Eigen::MatrixXd X(Q, 1);
    for (int i = 0; i < Q; ++i) X(i, 0) = -1.0 + 2.0 * i / Q;
    const Eigen::MatrixXd E = basis_matrix(X, basis);
    const Eigen::MatrixXd G = E.transpose() * E / Q;
    CHECK((G - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero response keeps every coefficient at zero") {
    const auto basis = fourier_index_order(2, 2.0, 30);
    const auto design = sample_torus_design(2, 200, 0.0, 4, zero_target);
    for (int i = 0; i < design.X.rows(); ++i)
        for (int k = 0; k < 2; ++k) {
            REQUIRE(design.X(i, k) >= -1.0);
            REQUIRE(design.X(i, k) < 1.0);
        }
    const auto sys = make_feature_system(design, basis);
    const std::vector<double> grid{0.0, 1.0, 100.0, 1e6};
    for (const auto& tr : {fit_fixed_kernel_gf(sys, grid), fit_adaptive_diagonal(sys, {grid.begin(), grid.begin() + 3}),
                           fit_adaptive_diagonal(sys, {grid.begin(), grid.begin() + 3}, {2, 0.5, std::nullopt})})
        for (const auto& th : tr.theta) CHECK(th.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one point, constant basis function") {
    const auto basis = fourier_index_order(2, 2.0, 1);
    TorusDesign design;
    design.d = 2;
    design.n = 1;
    design.X = Eigen::MatrixXd::Zero(1, 2);
    design.X(0, 0) = 0.3;
    design.y = Eigen::VectorXd::Constant(1, 2.0);
    const auto sys = make_feature_system(design, basis);
    const std::vector<double> grid{1e6};
    CHECK(fit_fixed_kernel_gf(sys, grid).theta[0](0) == doctest::Approx(2.0).epsilon(1e-12));
    FixedKernelOptions gd;
    gd.solver = KernelSolver::gd;
    CHECK(fit_fixed_kernel_gf(sys, std::vector<double>{200.0}, gd).theta[0](0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit_adaptive_diagonal(sys, std::vector<double>{200.0}).theta[0](0) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("single basis function response, checked against least squares") {
    const auto basis = fourier_index_order(2, 2.0, 13);
    const std::size_t k = 6;
    const auto& ek = basis.index_list[k];
    const TargetFn target = [&](std::span<const double> x) { return ek.eval(x); };
    const auto design = sample_torus_design(2, 500, 0.0, 17, target);
    const auto sys = make_feature_system(design, basis);
    const Eigen::VectorXd ls = sys.G.ldlt().solve(sys.c);
    const auto fit = fit_fixed_kernel_gf(sys, std::vector<double>{1e12});
    const Eigen::VectorXd& th = fit.theta[0];
    CHECK((th - ls).cwiseAbs().maxCoeff() <= 1e-6);
    for (std::size_t j = 0; j < basis.M; ++j) {
        if (j == k) CHECK(std::abs(th(j) - 1.0) <= 0.05);
        else CHECK(std::abs(th(j)) <= 0.05);
    }
}

TEST_CASE("identity Gram reduces to the sequence-model flows") {
    const std::vector<double> z{0.8, -0.3, 0.05, 0.0, 1.2};
    const std::vector<double> lambdas{1.0, 0.25, 0.25, 0.04, 0.04};
    const auto sys = identity_system(z, lambdas);
    const std::vector<double> grid{0.5, 2.0, 5.0, 20.0};

    const auto fixed = fit_fixed_kernel_gf(sys, grid);
    const auto van = [&](double t) { return vanilla_estimate(z, lambdas, t); };
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto v = van(grid[i]);
        for (std::size_t j = 0; j < z.size(); ++j) CHECK(fixed.theta[i](j) == doctest::Approx(v[j]).epsilon(1e-12));
    }

    AdaptiveKernelOptions two;
    two.eta = 1e-4;
    const auto ad = fit_adaptive_diagonal(sys, grid, two);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < z.size(); ++j)
            CHECK(std::abs(ad.theta[i](j) - twolayer_theta(lambdas[j], z[j], grid[i])) <= 1e-3);

    AdaptiveKernelOptions deep{1, 0.4, 1e-4};
    const auto ad1 = fit_adaptive_diagonal(sys, grid, deep);
    for (std::size_t j = 0; j < z.size(); ++j) {
        const FlowParams fp{lambdas[j], z[j], 1, 0.4};
        std::vector<double> beta(grid.size());
        solve_flow_at(fp, grid, beta);
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK(std::abs(ad1.theta[i](j) - theta_from_beta(fp, beta[i])) <= 1e-3);
    }
}

TEST_CASE("holdout risk does not depend on training order") {
    const auto basis = fourier_index_order(2, 2.0, 40);
    const SineTarget f{2.0, 1};
    const auto design = sample_torus_design(2, 120, 0.1, 8, f);
    TorusDesign perm = design;
    std::vector<int> idx(design.n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937 gen(2);
    std::shuffle(idx.begin(), idx.end(), gen);
    for (std::size_t i = 0; i < design.n; ++i) {
        perm.X.row(i) = design.X.row(idx[i]);
        perm.y(i) = design.y(idx[i]);
    }
    const auto hold = sample_torus_design(2, 300, 0.0, 99, f);
    const Eigen::MatrixXd E_hold = basis_matrix(hold.X, basis);
    const std::vector<double> grid{1.0, 10.0, 100.0};
    const auto sa = make_feature_system(design, basis);
    const auto sb = make_feature_system(perm, basis);
    const auto ha = holdout_risk(fit_adaptive_diagonal(sa, grid), E_hold, hold.y);
    const auto hb = holdout_risk(fit_adaptive_diagonal(sb, grid), E_hold, hold.y);
    const auto fa = holdout_risk(fit_fixed_kernel_gf(sa, grid), E_hold, hold.y);
    const auto fb = holdout_risk(fit_fixed_kernel_gf(sb, grid), E_hold, hold.y);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(ha[i] == doctest::Approx(hb[i]).epsilon(1e-9));
        CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-9));
    }
}

TEST_CASE("fixed kernel interpolates when n < M") {
    const auto basis = fourier_index_order(2, 2.0, 60);
    const SineTarget f{1.5, 0};
    const auto design = sample_torus_design(2, 25, 0.1, 3, f);
    const auto sys = make_feature_system(design, basis);
    const auto fit = fit_fixed_kernel_gf(sys, std::vector<double>{1.0, 1e14});
    CHECK(training_loss(sys, fit.theta[1]) <= 1e-8 * sys.y2);
    CHECK(fit.train_loss[1] < fit.train_loss[0]);
    const auto hold = sample_torus_design(2, 400, 0.0, 5, f);
    const auto h = holdout_risk(fit, basis_matrix(hold.X, basis), hold.y);
    CHECK(std::isfinite(h[1]));
    CHECK(h[1] > 0.0);
}

TEST_CASE("noiseless in-span target is recovered") {
    const auto basis = fourier_index_order(2, 2.0, 40);
    const SineTarget f{3.0, 0};
    double in_span = 0.0;
    for (const auto& e : basis.index_list) in_span += f.coefficient(e) * f.coefficient(e);
    REQUIRE(in_span == doctest::Approx(f.norm2()).epsilon(1e-12));
    const auto design = sample_torus_design(2, 500, 0.0, 12, f);
    const auto sys = make_feature_system(design, basis);
    const std::vector<double> grid{300.0};
    CHECK(exact_l2_risk(fit_adaptive_diagonal(sys, grid), basis, f)[0] <= 1e-3);
    CHECK(exact_l2_risk(fit_fixed_kernel_gf(sys, std::vector<double>{1e12}), basis, f)[0] <= 1e-3);
}

TEST_CASE("sine target expansion") {
    const SineTarget half{7.5, 0};
    CHECK(half.norm2() == doctest::Approx(0.5).epsilon(1e-15));
    const auto basis = fourier_index_order(2, 2.0, 306);
    double captured = 0.0;
    for (const auto& e : basis.index_list) captured += half.coefficient(e) * half.coefficient(e);
    CHECK(captured < 0.5);
    CHECK(captured > 0.4);
}

TEST_CASE("gd step guard and CSV output") {
    const auto basis = fourier_index_order(2, 2.0, 5);
    const auto design = sample_torus_design(2, 50, 0.1, 1, SineTarget{1.0, 0});
    const auto sys = make_feature_system(design, basis);
    FixedKernelOptions bad;
    bad.solver = KernelSolver::gd;
    bad.eta = 100.0;
    CHECK_THROWS(fit_fixed_kernel_gf(sys, std::vector<double>{1000.0}, bad));

    const auto fit = fit_fixed_kernel_gf(sys, std::vector<double>{1.0, 2.0});
    std::ostringstream os;
    write_kernel_csv(os, "fixed", 3, fit, std::vector<double>{0.1, 0.2}, true);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "method,seed,t,train_loss,holdout_risk");
    std::ostringstream snap;
    write_coefficient_snapshots(snap, "fixed", 3, fit, basis, 2, true);
    std::istringstream sin(snap.str());
    std::getline(sin, line);
    CHECK(line == "method,seed,t,rank,multi_index,lambda,coefficient");
    int rows = 0;
    while (std::getline(sin, line)) ++rows;
    CHECK(rows == 4);
}
