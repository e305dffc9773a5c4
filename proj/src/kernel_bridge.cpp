#include "seqflow/kernel_bridge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "seqflow/error.hpp"
#include "seqflow/numerics.hpp"
#include "seqflow/random.hpp"

namespace seqflow {

namespace {

constexpr double kPi = std::numbers::pi;

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

int norm2(const std::vector<int>& m) {
    int s = 0;
    for (int v : m) s += v * v;
    return s;
}

// All half-lattice m (first nonzero coordinate positive, plus m = 0) with |m|^2 <= K.
void enumerate(int d, int K, std::vector<int>& cur, bool leading, std::vector<std::vector<int>>& out) {
    const int used = norm2(cur);
    if (static_cast<int>(cur.size()) == d) {
        out.push_back(cur);
        return;
    }
    const int lim = static_cast<int>(std::floor(std::sqrt(static_cast<double>(K - used))));
    // While every earlier coordinate is zero, this one must be >= 0.
    for (int v = leading ? 0 : -lim; v <= lim; ++v) {
        if (used + v * v > K) continue;
        cur.push_back(v);
        enumerate(d, K, cur, leading && v == 0, out);
        cur.pop_back();
    }
}

std::size_t function_count(const std::vector<std::vector<int>>& ms) {
    std::size_t c = 0;
    for (const auto& m : ms) c += norm2(m) == 0 ? 1 : 2;
    return c;
}

}  // namespace

std::string BasisFunction::label() const {
    std::string s = is_sin ? "sin" : "cos";
    for (int v : m) s += " " + std::to_string(v);
    return s;
}

double BasisFunction::eval(std::span<const double> x) const {
    double dot = 0.0;
    bool zero = true;
    for (std::size_t i = 0; i < m.size(); ++i) {
        dot += m[i] * x[i];
        zero = zero && m[i] == 0;
    }
    if (zero) return 1.0;
    return std::numbers::sqrt2 * (is_sin ? std::sin(kPi * dot) : std::cos(kPi * dot));
}

std::vector<double> FourierDesign::lambdas() const {
    std::vector<double> l(index_list.size());
    for (std::size_t k = 0; k < l.size(); ++k) l[k] = index_list[k].lambda;
    return l;
}

FourierDesign fourier_index_order(int d, double r, std::size_t M) {
    if (d < 1) throw std::invalid_argument("fourier_index_order: d must be at least 1");
    if (M < 1) throw std::invalid_argument("fourier_index_order: M must be at least 1");
    if (!(r > 0.5 * d))
        throw std::invalid_argument("fourier_index_order: r must exceed d/2 for a trace-class kernel");
    std::vector<std::vector<int>> ms;
    int K = 1;
    for (;;) {
        ms.clear();
        std::vector<int> cur;
        enumerate(d, K, cur, true, ms);
        if (function_count(ms) >= M) break;
        K *= 2;
    }
    std::sort(ms.begin(), ms.end(), [](const auto& a, const auto& b) {
        const int na = norm2(a), nb = norm2(b);
        return na != nb ? na < nb : a < b;
    });
    FourierDesign fd;
    fd.d = d;
    fd.r = r;
    fd.M = M;
    for (const auto& m : ms) {
        const double lam = std::pow(1.0 + norm2(m), -r);
        fd.index_list.push_back({m, false, lam});
        if (fd.index_list.size() == M) break;
        if (norm2(m) == 0) continue;
        fd.index_list.push_back({m, true, lam});
        if (fd.index_list.size() == M) break;
    }
    return fd;
}

std::size_t default_basis_size(int d, double r, double rel, std::size_t cap) {
    if (!(rel > 0.0 && rel < 1.0)) throw std::invalid_argument("default_basis_size: rel must lie in (0, 1)");
    // lambda_m <= rel exactly when |m|^2 >= rel^{-1/r} - 1.
    const double kmin = std::pow(rel, -1.0 / r) - 1.0;
    const int K = static_cast<int>(std::ceil(kmin - 1e-12)) - 1;  // largest |m|^2 with lambda above rel
    std::vector<std::vector<int>> ms;
    std::vector<int> cur;
    if (K >= 0) enumerate(d, K, cur, true, ms);
    return std::min(cap, function_count(ms) + 1);
}

Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& X, const FourierDesign& basis) {
    const auto n = X.rows();
    const auto M = static_cast<Eigen::Index>(basis.index_list.size());
    Eigen::MatrixXd E(n, M);
    std::vector<double> x(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < X.cols(); ++k) x[static_cast<std::size_t>(k)] = X(i, k);
        for (Eigen::Index k = 0; k < M; ++k) E(i, k) = basis.index_list[static_cast<std::size_t>(k)].eval(x);
    }
    return E;
}

TorusDesign sample_torus_design(int d, std::size_t n, double sigma, std::uint64_t seed, const TargetFn& target) {
    if (d < 1) throw std::invalid_argument("sample_torus_design: d must be at least 1");
    if (n < 1) throw std::invalid_argument("sample_torus_design: n must be at least 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("sample_torus_design: sigma must be non-negative");
    TorusDesign des;
    des.d = d;
    des.n = n;
    des.sigma = sigma;
    des.seed = seed;
    des.X.resize(static_cast<Eigen::Index>(n), d);
    des.y.resize(static_cast<Eigen::Index>(n));
    const CounterRng xs(derive_key(seed, 0)), noise(derive_key(seed, 1));
    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) {
            double v = xs.uniform_in(i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k), -1.0, 1.0);
            if (v >= 1.0) v = -1.0;
            x[static_cast<std::size_t>(k)] = v;
            des.X(static_cast<Eigen::Index>(i), k) = v;
        }
        des.y(static_cast<Eigen::Index>(i)) = target(x) + sigma * noise.gaussian(i);
    }
    return des;
}

double SineTarget::operator()(std::span<const double> x) const {
    return std::sin(kPi * freq * x[static_cast<std::size_t>(coord)]);
}

double SineTarget::coefficient(const BasisFunction& e) const {
    if (!e.is_sin) return 0.0;  // odd target against even functions
    for (std::size_t i = 0; i < e.m.size(); ++i)
        if (static_cast<int>(i) != coord && e.m[i] != 0) return 0.0;
    const double a = kPi * freq;
    const double b = kPi * e.m[static_cast<std::size_t>(coord)];
    auto sinc = [](double u) { return u == 0.0 ? 1.0 : std::sin(u) / u; };
    // (1/2) int_{-1}^{1} sin(a x) sqrt(2) sin(b x) dx
    return std::numbers::sqrt2 * 0.5 * (sinc(a - b) - sinc(a + b));
}

double SineTarget::norm2() const {
    const double a = kPi * freq;
    return 0.5 * (1.0 - (a == 0.0 ? 1.0 : std::sin(2.0 * a) / (2.0 * a)));
}

FeatureSystem make_feature_system(const TorusDesign& design, const FourierDesign& basis) {
    if (design.n < 1) throw std::invalid_argument("make_feature_system: empty design");
    const Eigen::MatrixXd E = basis_matrix(design.X, basis);
    const double inv_n = 1.0 / static_cast<double>(design.n);
    FeatureSystem sys;
    sys.G = (E.transpose() * E) * inv_n;
    sys.c = (E.transpose() * design.y) * inv_n;
    sys.y2 = design.y.squaredNorm() * inv_n;
    sys.lambdas = basis.lambdas();
    return sys;
}

double training_loss(const FeatureSystem& sys, const Eigen::VectorXd& theta) {
    return 0.5 * (sys.y2 - 2.0 * theta.dot(sys.c) + theta.dot(sys.G * theta));
}

namespace {

void check_grid(std::span<const double> t_grid) {
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] >= 0.0)) throw std::invalid_argument("kernel fit: checkpoint times must be non-negative");
        if (i > 0 && t_grid[i] < t_grid[i - 1]) throw std::invalid_argument("kernel fit: checkpoints must be sorted");
    }
}

void check_system(const FeatureSystem& sys) {
    const auto M = sys.c.size();
    if (sys.G.rows() != M || sys.G.cols() != M || static_cast<Eigen::Index>(sys.lambdas.size()) != M)
        throw std::invalid_argument("kernel fit: inconsistent feature system dimensions");
}

}  // namespace

KernelTrajectory fit_fixed_kernel_gf(const FeatureSystem& sys, std::span<const double> t_grid,
                                     const FixedKernelOptions& opts) {
    check_system(sys);
    check_grid(t_grid);
    const auto M = sys.c.size();
    Eigen::VectorXd sl(M);
    for (Eigen::Index k = 0; k < M; ++k) sl(k) = std::sqrt(sys.lambdas[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd S = sl.asDiagonal() * sys.G * sl.asDiagonal();
    const Eigen::VectorXd w = sl.cwiseProduct(sys.c);
    KernelTrajectory out;

    if (opts.solver == KernelSolver::exact) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
        const Eigen::VectorXd s = eig.eigenvalues();
        const Eigen::MatrixXd& U = eig.eigenvectors();
        const Eigen::VectorXd uw = U.transpose() * w;
        const double s_max = std::max(s.maxCoeff(), 0.0);
        for (double t : t_grid) {
            Eigen::VectorXd phi(M);
            for (Eigen::Index k = 0; k < M; ++k) {
                // directions with no curvature carry no data (w lies in range(S))
                phi(k) = s(k) <= 1e-12 * s_max ? 0.0 : -std::expm1(-s(k) * t) / s(k);
            }
            const Eigen::VectorXd beta = U * phi.cwiseProduct(uw);
            Eigen::VectorXd theta = sl.cwiseProduct(beta);
            out.t.push_back(t);
            out.train_loss.push_back(training_loss(sys, theta));
            out.theta.push_back(std::move(theta));
        }
        return out;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
    const double s_max = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    const double eta = opts.eta ? *opts.eta : 0.5 / s_max;
    if (!(eta > 0.0)) throw std::invalid_argument("fit_fixed_kernel_gf: eta must be positive");
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(M);
    double t = 0.0;
    const double wn = w.norm();
    for (double t_rec : t_grid) {
        while (t < t_rec) {
            const double h = std::min(eta, t_rec - t);
            beta += h * (w - S * beta);
            t = (h == t_rec - t) ? t_rec : t + h;
            const double bn = beta.norm();
            if (!std::isfinite(bn) || bn > 1e10 * (1.0 + wn * t)) {
                char buf[200];
                std::snprintf(buf, sizeof buf,
                              "fit_fixed_kernel_gf: gradient descent diverged at t=%.6g (eta=%.4g, eta*s_max=%.4g > 2 "
                              "is unstable)",
                              t, eta, eta * s_max);
                throw NumericalAbort(buf);
            }
        }
        Eigen::VectorXd theta = sl.cwiseProduct(beta);
        out.t.push_back(t_rec);
        out.train_loss.push_back(training_loss(sys, theta));
        out.theta.push_back(std::move(theta));
    }
    return out;
}

double adaptive_default_step(const FeatureSystem& sys, double b0, int depth) {
    check_system(sys);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.G, Eigen::EigenvaluesOnly);
    const double g_max = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    const double c_max = sys.c.size() ? sys.c.cwiseAbs().maxCoeff() : 0.0;
    const double lam_max = sys.lambdas.empty() ? 1.0 : *std::max_element(sys.lambdas.begin(), sys.lambdas.end());
    return 0.05 / (g_max * ipow(b0 * b0, depth) * (1.0 + c_max) * (1.0 + c_max) + 2.0 * c_max + lam_max);
}

KernelTrajectory fit_adaptive_diagonal(const FeatureSystem& sys, std::span<const double> t_grid,
                                       const AdaptiveKernelOptions& opts) {
    check_system(sys);
    check_grid(t_grid);
    if (opts.depth < 0) throw std::invalid_argument("fit_adaptive_diagonal: depth must be non-negative");
    if (!(opts.b0 > 0.0)) throw std::invalid_argument("fit_adaptive_diagonal: b0 must be positive");
    const int D = opts.depth;
    const auto M = sys.c.size();
    const double eta = opts.eta ? *opts.eta : adaptive_default_step(sys, opts.b0, D);
    if (!(eta > 0.0)) throw std::invalid_argument("fit_adaptive_diagonal: eta must be positive");

    Eigen::VectorXd a(M), b = Eigen::VectorXd::Constant(M, opts.b0), beta = Eigen::VectorXd::Zero(M);
    for (Eigen::Index k = 0; k < M; ++k) a(k) = std::sqrt(sys.lambdas[static_cast<std::size_t>(k)]);
    auto theta_of = [&] {
        Eigen::VectorXd th(M);
        for (Eigen::Index k = 0; k < M; ++k) th(k) = a(k) * ipow(b(k), D) * beta(k);
        return th;
    };
    KernelTrajectory out;
    double t = 0.0;
    Eigen::VectorXd theta = theta_of();
    for (double t_rec : t_grid) {
        while (t < t_rec) {
            const double h = std::min(eta, t_rec - t);
            const Eigen::VectorXd r = sys.c - sys.G * theta;
            for (Eigen::Index k = 0; k < M; ++k) {
                const double bD = ipow(b(k), D);
                const double bDm1 = D > 0 ? ipow(b(k), D - 1) : 0.0;
                const double da = bD * beta(k) * r(k);
                const double db = D * a(k) * bDm1 * beta(k) * r(k);
                const double dbeta = a(k) * bD * r(k);
                a(k) += h * da;
                b(k) += h * db;
                beta(k) += h * dbeta;
            }
            t = (h == t_rec - t) ? t_rec : t + h;
            theta = theta_of();
            if (!theta.allFinite()) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "fit_adaptive_diagonal: gradient descent diverged at t=%.6g (eta=%.4g)",
                              t, eta);
                throw NumericalAbort(buf);
            }
        }
        out.t.push_back(t_rec);
        out.train_loss.push_back(training_loss(sys, theta));
        out.theta.push_back(theta);
    }
    return out;
}

std::vector<double> holdout_risk(const KernelTrajectory& traj, const Eigen::MatrixXd& E_hold,
                                 const Eigen::VectorXd& f_hold) {
    if (E_hold.rows() != f_hold.size()) throw std::invalid_argument("holdout_risk: dimension mismatch");
    if (E_hold.rows() == 0) throw std::invalid_argument("holdout_risk: empty holdout sample");
    std::vector<double> out;
    out.reserve(traj.theta.size());
    for (const auto& th : traj.theta) {
        if (th.size() != E_hold.cols()) throw std::invalid_argument("holdout_risk: coefficient length mismatch");
        const Eigen::VectorXd diff = E_hold * th - f_hold;
        std::vector<double> sq(static_cast<std::size_t>(diff.size()));
        for (Eigen::Index i = 0; i < diff.size(); ++i) sq[static_cast<std::size_t>(i)] = diff(i) * diff(i);
        out.push_back(mean(sq));
    }
    return out;
}

std::vector<double> exact_l2_risk(const KernelTrajectory& traj, const FourierDesign& basis,
                                  const SineTarget& target) {
    const std::size_t M = basis.index_list.size();
    std::vector<double> coef(M);
    double in_span = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
        coef[k] = target.coefficient(basis.index_list[k]);
        in_span += coef[k] * coef[k];
    }
    const double outside = std::max(0.0, target.norm2() - in_span);
    std::vector<double> out;
    for (const auto& th : traj.theta) {
        if (static_cast<std::size_t>(th.size()) != M) throw std::invalid_argument("exact_l2_risk: length mismatch");
        std::vector<double> sq(M);
        for (std::size_t k = 0; k < M; ++k) {
            const double d = th(static_cast<Eigen::Index>(k)) - coef[k];
            sq[k] = d * d;
        }
        out.push_back(pairwise_sum(sq) + outside);
    }
    return out;
}

void write_kernel_csv(std::ostream& out, const std::string& method, std::uint64_t seed,
                      const KernelTrajectory& traj, std::span<const double> holdout, bool header) {
    if (holdout.size() != traj.t.size()) throw std::invalid_argument("write_kernel_csv: length mismatch");
    if (header) out << "method,seed,t,train_loss,holdout_risk\n";
    char buf[160];
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        std::snprintf(buf, sizeof buf, ",%llu,%.12g,%.12g,%.12g\n", static_cast<unsigned long long>(seed), traj.t[k],
                      traj.train_loss[k], holdout[k]);
        out << method << buf;
    }
}

void write_coefficient_snapshots(std::ostream& out, const std::string& method, std::uint64_t seed,
                                 const KernelTrajectory& traj, const FourierDesign& basis, std::size_t top,
                                 bool header) {
    if (header) out << "method,seed,t,rank,multi_index,lambda,coefficient\n";
    char buf[200];
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        const auto& th = traj.theta[k];
        std::vector<std::size_t> idx(static_cast<std::size_t>(th.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const std::size_t keep = std::min(top, idx.size());
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                          [&](std::size_t x, std::size_t y) {
                              const double ax = std::abs(th(static_cast<Eigen::Index>(x)));
                              const double ay = std::abs(th(static_cast<Eigen::Index>(y)));
                              return ax != ay ? ax > ay : x < y;
                          });
        for (std::size_t i = 0; i < keep; ++i) {
            const auto& e = basis.index_list[idx[i]];
            std::snprintf(buf, sizeof buf, ",%llu,%.12g,%zu,%s,%.12g,%.12g\n", static_cast<unsigned long long>(seed),
                          traj.t[k], idx[i] + 1, e.label().c_str(), e.lambda, th(static_cast<Eigen::Index>(idx[i])));
            out << method << buf;
        }
    }
}

}  // namespace seqflow
