#ifndef SEQFLOW_RISK_ANALYSIS_HPP
#define SEQFLOW_RISK_ANALYSIS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqflow/ode.hpp"
#include "seqflow/sequence_core.hpp"

namespace seqflow {

/// sum_j (theta_hat_j - theta*_j)^2.
double risk(std::span<const double> theta_hat, std::span<const double> theta_star);

struct VanillaRisk {
    double bias2 = 0.0;
    double variance = 0.0;
    double total = 0.0;
};

/// Exact expected risk of (1 - e^{-lambda t}) z.
VanillaRisk vanilla_risk_closed_form(std::span<const double> theta_star, std::span<const double> lambdas,
                                     double epsilon, double t);

/// eps^2 Phi(eps) + Psi(eps).
double ideal_risk(std::span<const double> theta_star, double epsilon);

/// sum_j [xi_j^2 1{2|xi_j| < |theta_j|} + theta_j^2 1{2|xi_j| >= |theta_j|}].
double indicator_decomposition(std::span<const double> theta_star, std::span<const double> xi);

/// Risk of keeping z_j exactly where |theta*_j| >= eps and zeroing the rest.
double oracle_projection_risk(std::span<const double> theta_star, std::span<const double> z, double epsilon);

/// Discrete argmin over checkpoints, ties towards smaller t. Needs >= 2 points.
std::pair<double, double> oracle_stopping_search(std::span<const double> times, std::span<const double> risks);

struct RateFit {
    double exponent = 0.0;  // r in risk ~ n^{-r}
    double intercept = 0.0;
    double std_error = 0.0;
    std::vector<double> n_grid;
};

/// OLS of log(risk) on log(n). Rejects non-positive values and fewer than 3 points.
RateFit loglog_rate_fit(std::span<const double> n_grid, std::span<const double> risks);

enum class EstimatorKind { vanilla, op };

struct Estimator {
    EstimatorKind kind = EstimatorKind::op;
    int depth = 0;

    static Estimator vanilla() { return {EstimatorKind::vanilla, 0}; }
    static Estimator op(int depth) { return {EstimatorKind::op, depth}; }

    std::string name() const;                               // "vanilla" or "op"
    std::string label() const;                              // "vanilla", "op0", "op2", ...
    static Estimator parse(const std::string& label);       // inverse of label()
    bool operator==(const Estimator&) const = default;
};

enum class StoppingRule { oracle, schedule, fixed_time };

// How the over-parameterized flow is evaluated in Monte Carlo runs.
enum class FlowSolver { exact, euler, rk4 };

struct MonteCarloOptions {
    StoppingRule stopping = StoppingRule::oracle;
    double fixed_t = 0.0;       // used with StoppingRule::fixed_time
    FlowSolver solver = FlowSolver::exact;
    double horizon = 10.0;      // op grid runs to horizon * t_stop
    double vanilla_horizon = 10.0;  // vanilla grid runs to vanilla_horizon * eps^{-2 gamma}
    double grid_ratio = 1.2;
    std::optional<double> eta;  // first checkpoint and fixed step; default 0.05 / L_max
    double drift_tol = 0.0;     // <= 0: 1e-6 for rk4, 1e-2 for euler
    AdaptiveOptions ode{1e-8, 1e-14, 50'000'000};  // exact solver for D >= 1
    unsigned threads = 1;
    bool keep_curves = false;
};

struct RiskSummary {
    std::size_t n = 0;
    double mean_risk = 0.0;
    double std_risk = 0.0;
    std::size_t reps = 0;
    double oracle_t = 0.0;  // mean over reps of the chosen stopping time
    Estimator estimator;
    std::size_t boundary_hits = 0;  // reps whose oracle time is the last checkpoint

    std::vector<double> rep_risk;  // per repetition, in rep order
    std::vector<double> rep_t;
    std::vector<double> grid;        // checkpoint grid (oracle rule)
    std::vector<double> mean_curve;  // mean risk per checkpoint, when keep_curves

    double sem() const;
};

/// Checkpoint grid used for the given estimator at noise level eps.
std::vector<double> checkpoint_grid(const SignalSpec& spec, const EigenSchedule& schedule, const Estimator& est,
                                    double epsilon, const MonteCarloOptions& opts);

/// Stopping time of the schedule rule: t_stop for op(D); eps^{-2 q gamma / (p + q)} for vanilla
/// with a power-law signal.
double schedule_time(const SignalSpec& spec, const EigenSchedule& schedule, const Estimator& est, double epsilon);

/// Truncation used for Monte Carlo runs down to noise level eps_min:
/// max(10^4, 2 * covering_length(spec, eps_min)), never below the sparse support.
std::size_t default_truncation(const SignalSpec& spec, double eps_min);

/// Noise key of a Monte Carlo cell. It ignores n, so every n and every estimator
/// share the same underlying Gaussian draws (common random numbers).
std::uint64_t cell_key(std::uint64_t master_seed, std::size_t n);

/// Mean and standard deviation of the risk over `reps` instances at eps = n^{-1/2}.
/// Repetition r uses noise key instance_key(cell_key(master_seed, n), r), so
/// different estimators see the same noise. Components past schedule.N are
/// estimated by zero and contribute their analytic tail energy.
RiskSummary monte_carlo_risk(const SignalSpec& spec, const EigenSchedule& schedule, const Estimator& est,
                             std::size_t n, std::size_t reps, std::uint64_t master_seed,
                             const MonteCarloOptions& opts = {});

/// Risk curve of one estimator on one instance at the given checkpoint times.
std::vector<double> risk_curve(const SequenceInstance& inst, std::span<const double> lambdas, const Estimator& est,
                               std::span<const double> times, const MonteCarloOptions& opts = {});

struct SummaryRow {
    RiskSummary summary;
    double p = 0.0;
    double q = 0.0;
    double gamma = 0.0;
    std::optional<RateFit> fit;
};

/// Header: estimator,D,p,q,gamma,n,reps,mean_risk,std_risk,oracle_t,exponent,stderr
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

std::string format_double(double v);

}  // namespace seqflow

#endif  // SEQFLOW_RISK_ANALYSIS_HPP
