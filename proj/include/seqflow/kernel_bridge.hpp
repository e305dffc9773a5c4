#ifndef SEQFLOW_KERNEL_BRIDGE_HPP
#define SEQFLOW_KERNEL_BRIDGE_HPP

// Regression on the torus [-1, 1)^d with the real trigonometric basis
//   e_0 = 1,  sqrt(2) cos(pi <m, x>),  sqrt(2) sin(pi <m, x>),
// m ranging over the half lattice (first nonzero coordinate positive), and
// eigenvalues lambda_m = (1 + |m|^2)^{-r}. Fits run on the empirical feature
// system G = E^T E / n, c = E^T y / n, so any Gram matrix can be injected.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqflow {

struct TorusDesign {
    int d = 2;
    std::size_t n = 0;
    Eigen::MatrixXd X;  // n x d, coordinates in [-1, 1)
    Eigen::VectorXd y;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

struct BasisFunction {
    std::vector<int> m;
    bool is_sin = false;  // cos otherwise; the constant function is cos with m = 0
    double lambda = 1.0;

    std::string label() const;  // "cos 0 1", "sin 2 -1", "cos 0 0"
    double eval(std::span<const double> x) const;
};

struct FourierDesign {
    int d = 0;
    double r = 0.0;
    std::size_t M = 0;
    std::vector<BasisFunction> index_list;

    std::vector<double> lambdas() const;
};

/// First M functions ordered by lambda descending (|m|^2 ascending), then m
/// lexicographically, cos before sin. Rejects M < 1, d < 1 and r <= d / 2.
FourierDesign fourier_index_order(int d, double r, std::size_t M);

/// Smallest M with lambda_M <= rel * lambda_1, capped at `cap`.
std::size_t default_basis_size(int d, double r, double rel = 1e-4, std::size_t cap = 5000);

/// n x M matrix of basis values at the rows of X.
Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& X, const FourierDesign& basis);

using TargetFn = std::function<double(std::span<const double>)>;

/// Uniform design on [-1, 1)^d with y = f*(x) + sigma * noise, all drawn from `seed`.
TorusDesign sample_torus_design(int d, std::size_t n, double sigma, std::uint64_t seed, const TargetFn& target);

/// f*(x) = sin(pi * freq * x_coord) with its exact expansion in the basis.
struct SineTarget {
    double freq = 7.5;
    int coord = 0;

    double operator()(std::span<const double> x) const;
    double coefficient(const BasisFunction& e) const;
    double norm2() const;  // ||f*||^2 under the uniform measure
};

struct FeatureSystem {
    Eigen::MatrixXd G;
    Eigen::VectorXd c;
    double y2 = 0.0;  // mean of y^2
    std::vector<double> lambdas;
};

FeatureSystem make_feature_system(const TorusDesign& design, const FourierDesign& basis);

struct KernelTrajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> theta;
    std::vector<double> train_loss;
};

/// (1/2)(y2 - 2 theta^T c + theta^T G theta).
double training_loss(const FeatureSystem& sys, const Eigen::VectorXd& theta);

enum class KernelSolver { exact, gd };

struct FixedKernelOptions {
    KernelSolver solver = KernelSolver::exact;
    std::optional<double> eta;  // gd step; default 0.5 / s_max
};

/// Gradient flow on beta with features lambda^{1/2} e(x), beta(0) = 0, theta = lambda^{1/2} beta.
/// exact: spectral solution; gd: full-batch descent, NumericalAbort on eta * s_max > 2.
KernelTrajectory fit_fixed_kernel_gf(const FeatureSystem& sys, std::span<const double> t_grid,
                                     const FixedKernelOptions& opts = {});

struct AdaptiveKernelOptions {
    int depth = 0;
    double b0 = 1.0;
    std::optional<double> eta;  // default adaptive_default_step
};

/// 0.05 / (||G||_2 b0^{2D} (1 + c_max)^2 + 2 c_max + lambda_max).
double adaptive_default_step(const FeatureSystem& sys, double b0, int depth);

/// Full-batch gradient descent on (a, b, beta) with a(0) = lambda^{1/2}, b(0) = b0, beta(0) = 0,
/// theta = a b^D beta, checkpointed at t_grid (steps shortened to land on each checkpoint).
KernelTrajectory fit_adaptive_diagonal(const FeatureSystem& sys, std::span<const double> t_grid,
                                       const AdaptiveKernelOptions& opts = {});

/// Mean of (f_hat - f*)^2 over the rows of E_hold, per checkpoint.
std::vector<double> holdout_risk(const KernelTrajectory& traj, const Eigen::MatrixXd& E_hold,
                                 const Eigen::VectorXd& f_hold);

/// Exact L2 risk ||f_hat - f*||^2 from the target's coefficients.
std::vector<double> exact_l2_risk(const KernelTrajectory& traj, const FourierDesign& basis, const SineTarget& target);

/// Rows method,seed,t,train_loss,holdout_risk.
void write_kernel_csv(std::ostream& out, const std::string& method, std::uint64_t seed,
                      const KernelTrajectory& traj, std::span<const double> holdout, bool header);

/// Rows method,seed,t,rank,multi_index,lambda,coefficient for the `top` largest |theta| at each checkpoint.
void write_coefficient_snapshots(std::ostream& out, const std::string& method, std::uint64_t seed,
                                 const KernelTrajectory& traj, const FourierDesign& basis, std::size_t top,
                                 bool header);

}  // namespace seqflow

#endif  // SEQFLOW_KERNEL_BRIDGE_HPP
