#ifndef SEQFLOW_FLOW_DYNAMICS_HPP
#define SEQFLOW_FLOW_DYNAMICS_HPP

// Per-component gradient flows of the sequence model.
//
// Vanilla:      theta = lambda^{1/2} beta, only beta trained.
// Two-layer:    theta = a beta,          a(0) = lambda^{1/2}, beta(0) = 0.
// Depth D >= 1: theta = a b^D beta,      b(0) = b0.
//
// All flows descend L = (theta - z)^2 / 2. Along every trajectory
// a^2 - beta^2 = lambda and b^2 - D beta^2 = b0^2, which reduces each flow to
// a scalar ODE in beta; `solve_flow_at` exploits that for bulk evaluation,
// while `integrate_flow` steps the full (a, b, beta) system.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "seqflow/ode.hpp"

namespace seqflow {

struct FlowParams {
    double lambda = 1.0;
    double z = 0.0;
    int depth = 0;
    double b0 = 1.0;

    // lambda > 0, depth >= 0, b0 > 0, finite z.
    void validate() const;
};

struct FlowState {
    double a = 0.0;
    double b = 1.0;
    double beta = 0.0;
    double t = 0.0;
    int depth = 0;
    double lambda = 1.0;
    double b0 = 1.0;

    double theta() const;
    double eigen_term() const;
};

FlowState initial_state(const FlowParams& params);

// Rebuilds (a, b) from beta through the conservation laws.
FlowState state_from_beta(const FlowParams& params, double beta, double t);

enum class StepMethod { euler, rk4 };

struct IntegratorConfig {
    double eta = 1e-3;
    StepMethod method = StepMethod::rk4;
    std::vector<double> record_times;
    double drift_tol = 1e-6;
};

/// Local Lipschitz estimate lambda_max + 2 z_max + b0^{2D} (1 + z_max)^2.
double stability_constant(double lambda_max, double z_max, double b0, int depth);

/// 0.05 / stability_constant(...).
double default_step(double lambda_max, double z_max, double b0, int depth);

struct Schedule {
    double epsilon = 0.0;
    int depth = 0;
    double b0 = 1.0;
    double t_stop = 0.0;
};

/// b0 = eps^{1/(D+2)} (D >= 1, else 1) and t_stop = eps^{-(2D+2)/(D+2)}.
Schedule make_schedule(double epsilon, int depth);

/// (1 - exp(-lambda_j t)) z_j.
std::vector<double> vanilla_estimate(std::span<const double> z, std::span<const double> lambdas, double t);

/// Closed-form solution of d/dt u = (lambda + 2|u|)(z - u), u(0) = 0.
double theta_tilde(double lambda, double z, double t);

/// Exact two-layer solution theta(t) of d/dt theta = sqrt(lambda^2 + 4 theta^2)(z - theta).
double twolayer_theta(double lambda, double z, double t);

using Trajectory = std::vector<FlowState>;

/// Fixed-step integration of the full (a, b, beta) gradient flow, recorded at
/// cfg.record_times (steps are shortened to land on each record time).
/// Throws std::invalid_argument when eta * stability_constant > 0.1 and
/// NumericalAbort when the relative conservation drift exceeds cfg.drift_tol.
Trajectory integrate_flow(const FlowParams& params, const IntegratorConfig& cfg);

Trajectory integrate_twolayer(double lambda, double z, const IntegratorConfig& cfg);

Trajectory integrate_deep(double lambda, double b0, int depth, double z, const IntegratorConfig& cfg);

struct ConservationDrift {
    double a_beta = 0.0;  // |a^2 - beta^2 - lambda| / a^2
    double b_beta = 0.0;  // |b^2 - D beta^2 - b0^2| / b^2
};

ConservationDrift conservation_drift(const FlowState& state);

double eigen_term(const FlowState& state);

/// Beta of the exact flow at each (sorted, non-negative) time. D = 0 uses the
/// closed form; D >= 1 integrates the reduced beta equation adaptively.
void solve_flow_at(const FlowParams& params, std::span<const double> times, std::span<double> beta_out,
                   const AdaptiveOptions& opts = {});

/// Same output, always through the adaptive reduced-equation integrator.
void solve_flow_adaptive_at(const FlowParams& params, std::span<const double> times, std::span<double> beta_out,
                            const AdaptiveOptions& opts = {});

/// theta that corresponds to beta under the conservation laws.
double theta_from_beta(const FlowParams& params, double beta);

/// First time |theta(t)| reaches `fraction * |z|`, or nullopt if not reached by t_max.
std::optional<double> hitting_time(const FlowParams& params, double fraction, double t_max,
                                   const AdaptiveOptions& opts = {});

struct EscapeTimeBounds {
    double T1_lower = 0.0;
    double T2_lower = 0.0;
    std::optional<double> T12_lower;   // only when lambda^{1/2} <= b0 / sqrt(D)
    std::optional<double> Tsig_upper;  // only when z != 0
};

/// Noise-phase and signal-phase time bounds for a depth-D >= 1 flow.
EscapeTimeBounds escape_time_bounds(double lambda, double b0, int depth, double z);

/// Rate (1/4) D^{D/(D+2)} |z|^{(2D+2)/(D+2)} of the post-crossing convergence bound.
double signal_convergence_rate(int depth, double z);

void write_trajectory_csv(std::ostream& out, std::size_t component_index, const Trajectory& trajectory,
                          bool header = true);

}  // namespace seqflow

#endif  // SEQFLOW_FLOW_DYNAMICS_HPP
