#include "seqflow/flow_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "seqflow/error.hpp"

namespace seqflow {

namespace {

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

// b^D with b = (b0^2 + D beta^2)^{1/2}.
double depth_power(double b0, int depth, double beta) {
    if (depth == 0) return 1.0;
    const double s = b0 * b0 + depth * beta * beta;
    return (depth % 2 == 0) ? ipow(s, depth / 2) : std::sqrt(s) * ipow(s, (depth - 1) / 2);
}

void check_times(std::span<const double> times) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0)) throw std::invalid_argument("flow: record times must be non-negative");
        if (i > 0 && times[i] < times[i - 1]) throw std::invalid_argument("flow: record times must be sorted");
    }
}

struct Derivative {
    double da, db, dbeta;
};

Derivative flow_rhs(double a, double b, double beta, int depth, double z) {
    const double bD = ipow(b, depth);
    const double r = z - a * bD * beta;
    const double bDm1 = depth > 0 ? ipow(b, depth - 1) : 0.0;
    return {bD * beta * r, depth * a * bDm1 * beta * r, a * bD * r};
}

}  // namespace

void FlowParams::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("flow: lambda must be positive");
    if (depth < 0) throw std::invalid_argument("flow: depth must be non-negative");
    if (!(b0 > 0.0) || !std::isfinite(b0)) throw std::invalid_argument("flow: b0 must be positive");
    if (!std::isfinite(z)) throw std::invalid_argument("flow: z must be finite");
}

double FlowState::theta() const { return a * ipow(b, depth) * beta; }

double FlowState::eigen_term() const { return a * ipow(b, depth); }

double eigen_term(const FlowState& state) { return state.eigen_term(); }

FlowState initial_state(const FlowParams& params) {
    params.validate();
    FlowState s;
    s.a = std::sqrt(params.lambda);
    s.b = params.b0;
    s.beta = 0.0;
    s.t = 0.0;
    s.depth = params.depth;
    s.lambda = params.lambda;
    s.b0 = params.b0;
    return s;
}

FlowState state_from_beta(const FlowParams& params, double beta, double t) {
    FlowState s = initial_state(params);
    s.beta = beta;
    s.a = std::sqrt(params.lambda + beta * beta);
    s.b = params.depth == 0 ? params.b0 : std::sqrt(params.b0 * params.b0 + params.depth * beta * beta);
    s.t = t;
    return s;
}

double stability_constant(double lambda_max, double z_max, double b0, int depth) {
    return lambda_max + 2.0 * std::abs(z_max) + ipow(b0 * b0, depth) * (1.0 + std::abs(z_max)) * (1.0 + std::abs(z_max));
}

double default_step(double lambda_max, double z_max, double b0, int depth) {
    return 0.05 / stability_constant(lambda_max, z_max, b0, depth);
}

Schedule make_schedule(double epsilon, int depth) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("schedule: epsilon must lie in (0, 1)");
    if (depth < 0) throw std::invalid_argument("schedule: depth must be non-negative");
    Schedule s;
    s.epsilon = epsilon;
    s.depth = depth;
    const double d = static_cast<double>(depth);
    s.b0 = depth >= 1 ? std::pow(epsilon, 1.0 / (d + 2.0)) : 1.0;
    s.t_stop = std::pow(epsilon, -(2.0 * d + 2.0) / (d + 2.0));
    return s;
}

std::vector<double> vanilla_estimate(std::span<const double> z, std::span<const double> lambdas, double t) {
    if (z.size() != lambdas.size()) throw std::invalid_argument("vanilla_estimate: length mismatch");
    if (!(t >= 0.0)) throw std::invalid_argument("vanilla_estimate: t must be non-negative");
    std::vector<double> out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = -std::expm1(-lambdas[j] * t) * z[j];
    return out;
}

double theta_tilde(double lambda, double z, double t) {
    if (!(lambda > 0.0)) throw std::invalid_argument("theta_tilde: lambda must be positive");
    if (!(t >= 0.0)) throw std::invalid_argument("theta_tilde: t must be non-negative");
    const double az = std::abs(z);
    const double x = (2.0 * az + lambda) * t;
    if (x > 300.0) {
        const double inv = std::exp(-x);
        return z * lambda * (1.0 - inv) / (2.0 * az * inv + lambda);
    }
    const double em1 = std::expm1(x);
    return lambda * em1 / (2.0 * az + lambda * (1.0 + em1)) * z;
}

double twolayer_theta(double lambda, double z, double t) {
    if (!(lambda > 0.0)) throw std::invalid_argument("twolayer_theta: lambda must be positive");
    if (!(t >= 0.0)) throw std::invalid_argument("twolayer_theta: t must be non-negative");
    if (z == 0.0 || t == 0.0) return 0.0;
    // theta = (lambda/2) sinh(s) turns the flow into a separable rational
    // integral in W = e^s with poles w_plus (theta = z) and w_minus < 0.
    const double az = std::abs(z);
    const double R = std::hypot(2.0 * az, lambda);
    const double w_plus_m1 = (2.0 * az + 4.0 * az * az / (R + lambda)) / lambda;  // w_plus - 1
    const double one_m_w_minus = 1.0 + lambda / (2.0 * az + R);                  // 1 - w_minus
    const double K0 = one_m_w_minus / w_plus_m1;
    const double x = R * t;
    double frac;  // (K - K0) / (1 + K) with K = K0 e^x
    if (x < 1.0) {
        const double em1 = std::expm1(x);
        frac = K0 * em1 / (1.0 + K0 * (1.0 + em1));
    } else {
        const double inv = std::exp(-x);
        frac = K0 * (1.0 - inv) / (inv + K0);
    }
    const double W_m1 = w_plus_m1 * frac;
    const double W = 1.0 + W_m1;
    const double theta = 0.25 * lambda * W_m1 * (W + 1.0) / W;
    return std::copysign(std::min(theta, az), z);
}

Trajectory integrate_flow(const FlowParams& params, const IntegratorConfig& cfg) {
    params.validate();
    check_times(cfg.record_times);
    if (!(cfg.eta > 0.0)) throw std::invalid_argument("integrate_flow: eta must be positive");
    const double L = stability_constant(params.lambda, params.z, params.b0, params.depth);
    if (cfg.eta * L > 0.1)
        throw std::invalid_argument("integrate_flow: eta violates the stability bound eta * L_max <= 0.1 (L_max = " +
                                    std::to_string(L) + ")");

    FlowState s = initial_state(params);
    const int D = params.depth;
    const double z = params.z;
    Trajectory out;
    out.reserve(cfg.record_times.size());

    auto advance = [&](double h) {
        if (cfg.method == StepMethod::euler) {
            const auto k = flow_rhs(s.a, s.b, s.beta, D, z);
            s.a += h * k.da;
            s.b += h * k.db;
            s.beta += h * k.dbeta;
        } else {
            const auto k1 = flow_rhs(s.a, s.b, s.beta, D, z);
            const auto k2 = flow_rhs(s.a + 0.5 * h * k1.da, s.b + 0.5 * h * k1.db, s.beta + 0.5 * h * k1.dbeta, D, z);
            const auto k3 = flow_rhs(s.a + 0.5 * h * k2.da, s.b + 0.5 * h * k2.db, s.beta + 0.5 * h * k2.dbeta, D, z);
            const auto k4 = flow_rhs(s.a + h * k3.da, s.b + h * k3.db, s.beta + h * k3.dbeta, D, z);
            s.a += h / 6.0 * (k1.da + 2.0 * k2.da + 2.0 * k3.da + k4.da);
            s.b += h / 6.0 * (k1.db + 2.0 * k2.db + 2.0 * k3.db + k4.db);
            s.beta += h / 6.0 * (k1.dbeta + 2.0 * k2.dbeta + 2.0 * k3.dbeta + k4.dbeta);
        }
    };

    for (double t_rec : cfg.record_times) {
        while (s.t < t_rec) {
            const double h = std::min(cfg.eta, t_rec - s.t);
            advance(h);
            s.t = (h == t_rec - s.t) ? t_rec : s.t + h;
            if (!std::isfinite(s.a) || !std::isfinite(s.b) || !std::isfinite(s.beta))
                throw NumericalAbort("integrate_flow: state diverged at t=" + std::to_string(s.t));
        }
        const auto drift = conservation_drift(s);
        if (drift.a_beta > cfg.drift_tol || drift.b_beta > cfg.drift_tol) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "integrate_flow: conservation drift %.3e / %.3e exceeds tolerance %.3e at t=%.6g",
                          drift.a_beta, drift.b_beta, cfg.drift_tol, s.t);
            throw NumericalAbort(buf);
        }
        out.push_back(s);
    }
    return out;
}

Trajectory integrate_twolayer(double lambda, double z, const IntegratorConfig& cfg) {
    return integrate_flow(FlowParams{lambda, z, 0, 1.0}, cfg);
}

Trajectory integrate_deep(double lambda, double b0, int depth, double z, const IntegratorConfig& cfg) {
    if (depth < 1) throw std::invalid_argument("integrate_deep: depth must be at least 1");
    return integrate_flow(FlowParams{lambda, z, depth, b0}, cfg);
}

ConservationDrift conservation_drift(const FlowState& s) {
    ConservationDrift d;
    const double a2 = s.a * s.a;
    d.a_beta = std::abs(a2 - s.beta * s.beta - s.lambda) / a2;
    if (s.depth >= 1) {
        const double b2 = s.b * s.b;
        d.b_beta = std::abs(b2 - s.depth * s.beta * s.beta - s.b0 * s.b0) / b2;
    }
    return d;
}

double theta_from_beta(const FlowParams& params, double beta) {
    return std::sqrt(params.lambda + beta * beta) * depth_power(params.b0, params.depth, beta) * beta;
}

namespace {

struct ReducedRhs {
    double lambda, b0, z;  // z >= 0
    int depth;
    double operator()(double beta) const {
        const double ab = std::sqrt(lambda + beta * beta) * depth_power(b0, depth, beta);
        return ab * (z - ab * beta);
    }
    // d/dbeta of operator()
    double slope(double beta) const {
        const double g = std::sqrt(lambda + beta * beta) * depth_power(b0, depth, beta);
        const double dg =
            g * (beta / (lambda + beta * beta) + depth * depth * beta / (b0 * b0 + depth * beta * beta));
        return dg * z - 2.0 * g * dg * beta - g * g;
    }
};

// beta > 0 with theta_from_beta = z (> 0), by Newton from a nearby start.
double fixed_point_beta(const FlowParams& pos, double beta) {
    for (int it = 0; it < 50; ++it) {
        const double h = 1e-7 * std::max(beta, 1e-300);
        const double g = theta_from_beta(pos, beta) - pos.z;
        const double dg = (theta_from_beta(pos, beta + h) - theta_from_beta(pos, beta - h)) / (2.0 * h);
        if (!(dg > 0.0)) break;
        const double next = beta - g / dg;
        if (!(next > 0.0)) break;
        if (std::abs(next - beta) <= 1e-15 * beta) return next;
        beta = next;
    }
    return beta;
}

}  // namespace

void solve_flow_adaptive_at(const FlowParams& params, std::span<const double> times, std::span<double> beta_out,
                            const AdaptiveOptions& opts) {
    params.validate();
    check_times(times);
    if (times.size() != beta_out.size()) throw std::invalid_argument("solve_flow: output length mismatch");
    const double az = std::abs(params.z);
    if (az == 0.0 || times.empty()) {
        std::fill(beta_out.begin(), beta_out.end(), 0.0);
        return;
    }
    const double sign = params.z < 0.0 ? -1.0 : 1.0;
    FlowParams pos = params;
    pos.z = az;
    std::size_t idx = 0;
    while (idx < times.size() && times[idx] <= 0.0) beta_out[idx++] = 0.0;
    if (idx == times.size()) return;

    // Two stages. While beta grows roughly linearly, integrate beta itself;
    // once growth turns super-linear (the escape phase, many e-folds), switch
    // to y = ln(beta), in which that phase is close to linear.
    const ReducedRhs f{params.lambda, params.b0, az, params.depth};
    const double t_end = times.back();
    bool done = false;
    auto finish_if_converged = [&](double beta) {
        // Near theta = z the explicit step sits on its stability limit and the
        // residual stalls at the tolerance level; finish with the fixed point.
        if (idx < times.size() && az - theta_from_beta(pos, beta) <= 100.0 * opts.rtol * az) {
            const double fixed = fixed_point_beta(pos, beta);
            for (; idx < times.size(); ++idx) beta_out[idx] = sign * fixed;
            done = true;
        }
    };

    Dopri5<ReducedRhs> lin(f, 0.0, opts);
    while (idx < times.size()) {
        lin.step(t_end);
        while (idx < times.size() && times[idx] <= lin.t()) {
            beta_out[idx] = sign * (times[idx] == lin.t() ? lin.y() : lin.dense(times[idx]));
            ++idx;
        }
        finish_if_converged(lin.y());
        if (done || idx == times.size()) return;
        const double beta = lin.y();
        if (beta > 0.0 && f.slope(beta) * beta >= 0.5 * f(beta)) break;
    }

    auto log_rhs = [f](double y) {
        const double beta = std::exp(y);
        return f(beta) / beta;
    };
    AdaptiveOptions log_opts = opts;
    log_opts.atol = opts.rtol;  // absolute error in ln(beta) is relative error in beta
    log_opts.rtol = 0.0;
    Dopri5<decltype(log_rhs)> ode(log_rhs, std::log(lin.y()), log_opts, lin.t());
    while (idx < times.size()) {
        ode.step(t_end);
        while (idx < times.size() && times[idx] <= ode.t()) {
            beta_out[idx] = sign * std::exp(times[idx] == ode.t() ? ode.y() : ode.dense(times[idx]));
            ++idx;
        }
        finish_if_converged(std::exp(ode.y()));
    }
}

void solve_flow_at(const FlowParams& params, std::span<const double> times, std::span<double> beta_out,
                   const AdaptiveOptions& opts) {
    if (params.depth >= 1) {
        solve_flow_adaptive_at(params, times, beta_out, opts);
        return;
    }
    params.validate();
    check_times(times);
    if (times.size() != beta_out.size()) throw std::invalid_argument("solve_flow: output length mismatch");
    const double lam = params.lambda;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double th = twolayer_theta(lam, params.z, times[k]);
        const double beta2 = 2.0 * th * th / (std::hypot(lam, 2.0 * th) + lam);
        beta_out[k] = std::copysign(std::sqrt(beta2), th);
    }
}

std::optional<double> hitting_time(const FlowParams& params, double fraction, double t_max,
                                   const AdaptiveOptions& opts) {
    params.validate();
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("hitting_time: fraction must lie in (0, 1)");
    const double az = std::abs(params.z);
    if (az == 0.0) return std::nullopt;
    FlowParams pos = params;
    pos.z = az;
    const double level = fraction * az;
    Dopri5<ReducedRhs> ode(ReducedRhs{params.lambda, params.b0, az, params.depth}, 0.0, opts);
    while (ode.step(t_max)) {
        if (theta_from_beta(pos, ode.y()) >= level) {
            double lo = ode.step_start(), hi = ode.t();
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (theta_from_beta(pos, ode.dense(mid)) >= level) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
    }
    return std::nullopt;
}

EscapeTimeBounds escape_time_bounds(double lambda, double b0, int depth, double z) {
    if (!(lambda > 0.0) || !(b0 > 0.0) || depth < 1)
        throw std::invalid_argument("escape_time_bounds: need lambda > 0, b0 > 0, depth >= 1");
    const double D = static_cast<double>(depth);
    const double az = std::abs(z);
    const double sl = std::sqrt(lambda);
    const double sD = std::sqrt(D);
    const double c = std::pow(2.0, (D + 1.0) / 2.0);
    const double b0D = std::pow(b0, D);
    EscapeTimeBounds r;
    r.T1_lower = 1.0 / (c * b0D * az);
    r.T2_lower = 1.0 / (c * sD * sl * std::pow(b0, D - 1.0) * az);
    const bool first_case = sl <= b0 / sD;
    if (first_case) r.T12_lower = (1.0 + std::log(b0 / (sD * sl))) * r.T1_lower;
    if (az > 0.0) {
        if (first_case) {
            const double target = std::pow(std::pow(D, -D / 2.0) * az / 2.0, 1.0 / (D + 2.0));
            r.Tsig_upper = 2.0 / (b0D * az) * (1.0 + std::max(0.0, std::log(target / sl)));
        } else {
            const double R = depth == 1 ? std::log(std::pow(D * az / 2.0, 1.0 / (D + 2.0)) / b0) : 1.0 / (D - 1.0);
            r.Tsig_upper = 2.0 / (sD * sl * std::pow(b0, D - 1.0) * az) * (1.0 + std::max(0.0, R));
        }
    }
    return r;
}

double signal_convergence_rate(int depth, double z) {
    const double D = static_cast<double>(depth);
    return 0.25 * std::pow(D, D / (D + 2.0)) * std::pow(std::abs(z), (2.0 * D + 2.0) / (D + 2.0));
}

void write_trajectory_csv(std::ostream& out, std::size_t component_index, const Trajectory& trajectory,
                          bool header) {
    if (header) out << "component_index,t,theta,a,b,beta,eigen_term\n";
    char buf[256];
    for (const auto& s : trajectory) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", component_index, s.t, s.theta(),
                      s.a, s.b, s.beta, s.eigen_term());
        out << buf;
    }
}

}  // namespace seqflow
