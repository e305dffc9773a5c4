#include "seqflow/risk_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "seqflow/flow_dynamics.hpp"
#include "seqflow/numerics.hpp"
#include "seqflow/random.hpp"

namespace seqflow {

double risk(std::span<const double> theta_hat, std::span<const double> theta_star) {
    if (theta_hat.size() != theta_star.size()) throw std::invalid_argument("risk: length mismatch");
    std::vector<double> sq(theta_hat.size());
    for (std::size_t j = 0; j < sq.size(); ++j) {
        const double d = theta_hat[j] - theta_star[j];
        sq[j] = d * d;
    }
    return pairwise_sum(sq);
}

VanillaRisk vanilla_risk_closed_form(std::span<const double> theta_star, std::span<const double> lambdas,
                                     double epsilon, double t) {
    if (theta_star.size() != lambdas.size()) throw std::invalid_argument("vanilla_risk_closed_form: length mismatch");
    if (!(t >= 0.0)) throw std::invalid_argument("vanilla_risk_closed_form: t must be non-negative");
    std::vector<double> b(theta_star.size()), v(theta_star.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
        const double decay = std::exp(-lambdas[j] * t);
        const double gain = -std::expm1(-lambdas[j] * t);
        b[j] = decay * decay * theta_star[j] * theta_star[j];
        v[j] = gain * gain;
    }
    VanillaRisk r;
    r.bias2 = pairwise_sum(b);
    r.variance = epsilon * epsilon * pairwise_sum(v);
    r.total = r.bias2 + r.variance;
    return r;
}

double ideal_risk(std::span<const double> theta_star, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("ideal_risk: epsilon must be positive");
    const auto rep = structure_report(theta_star, epsilon);
    return epsilon * epsilon * rep.phi_of_delta + rep.psi_of_delta;
}

double indicator_decomposition(std::span<const double> theta_star, std::span<const double> xi) {
    if (theta_star.size() != xi.size()) throw std::invalid_argument("indicator_decomposition: length mismatch");
    std::vector<double> terms(xi.size());
    for (std::size_t j = 0; j < terms.size(); ++j) {
        const bool strong = 2.0 * std::abs(xi[j]) < std::abs(theta_star[j]);
        terms[j] = strong ? xi[j] * xi[j] : theta_star[j] * theta_star[j];
    }
    return pairwise_sum(terms);
}

double oracle_projection_risk(std::span<const double> theta_star, std::span<const double> z, double epsilon) {
    if (theta_star.size() != z.size()) throw std::invalid_argument("oracle_projection_risk: length mismatch");
    std::vector<double> est(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) est[j] = std::abs(theta_star[j]) >= epsilon ? z[j] : 0.0;
    return risk(est, theta_star);
}

std::pair<double, double> oracle_stopping_search(std::span<const double> times, std::span<const double> risks) {
    if (times.empty()) throw std::invalid_argument("oracle_stopping_search: empty risk curve");
    if (times.size() != risks.size()) throw std::invalid_argument("oracle_stopping_search: length mismatch");
    if (times.size() < 2) throw std::invalid_argument("oracle_stopping_search: need at least 2 checkpoints");
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (risks[k] < risks[best] || (risks[k] == risks[best] && times[k] < times[best])) best = k;
    }
    return {times[best], risks[best]};
}

RateFit loglog_rate_fit(std::span<const double> n_grid, std::span<const double> risks) {
    if (n_grid.size() != risks.size()) throw std::invalid_argument("loglog_rate_fit: length mismatch");
    if (n_grid.size() < 3) throw std::invalid_argument("loglog_rate_fit: need at least 3 grid points");
    std::vector<double> lx(n_grid.size()), ly(n_grid.size());
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (!(n_grid[i] > 0.0)) throw std::invalid_argument("loglog_rate_fit: grid values must be positive");
        if (!(risks[i] > 0.0)) throw std::invalid_argument("loglog_rate_fit: risks must be positive");
        lx[i] = std::log(n_grid[i]);
        ly[i] = std::log(risks[i]);
    }
    const auto fit = ols_fit(lx, ly);
    RateFit r;
    r.exponent = -fit.slope;
    r.intercept = fit.intercept;
    r.std_error = fit.slope_stderr;
    r.n_grid.assign(n_grid.begin(), n_grid.end());
    return r;
}

std::string Estimator::name() const { return kind == EstimatorKind::vanilla ? "vanilla" : "op"; }

std::string Estimator::label() const {
    return kind == EstimatorKind::vanilla ? "vanilla" : "op" + std::to_string(depth);
}

Estimator Estimator::parse(const std::string& label) {
    if (label == "vanilla") return vanilla();
    if (label.size() > 2 && label.compare(0, 2, "op") == 0) {
        const std::string digits = label.substr(2);
        if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
            digits.size() <= 2)
            return op(std::stoi(digits));
    }
    throw std::invalid_argument("unknown estimator '" + label + "' (expected vanilla or opD, e.g. op0)");
}

double RiskSummary::sem() const { return reps > 0 ? std_risk / std::sqrt(static_cast<double>(reps)) : 0.0; }

double schedule_time(const SignalSpec& spec, const EigenSchedule& schedule, const Estimator& est, double epsilon) {
    if (est.kind == EstimatorKind::op) return make_schedule(epsilon, est.depth).t_stop;
    if (spec.mode != SignalMode::power_law)
        throw std::invalid_argument("schedule_time: the vanilla schedule is defined for power-law signals only");
    return std::pow(epsilon, -2.0 * spec.q * schedule.gamma / (spec.p + spec.q));
}

std::vector<double> checkpoint_grid(const SignalSpec& spec, const EigenSchedule& schedule, const Estimator& est,
                                    double epsilon, const MonteCarloOptions& opts) {
    if (opts.stopping == StoppingRule::fixed_time) {
        if (!(opts.fixed_t >= 0.0)) throw std::invalid_argument("checkpoint_grid: fixed_t must be non-negative");
        return {opts.fixed_t};
    }
    if (opts.stopping == StoppingRule::schedule) return {schedule_time(spec, schedule, est, epsilon)};
    if (!(opts.grid_ratio > 1.0)) throw std::invalid_argument("checkpoint_grid: grid_ratio must exceed 1");

    const auto theta = build_signal(spec, schedule.N);
    double zmax = 5.0 * epsilon;
    for (double v : theta) zmax = std::max(zmax, std::abs(v) + 5.0 * epsilon);
    const int D = est.kind == EstimatorKind::op ? est.depth : 0;
    const double b0 = est.kind == EstimatorKind::op ? make_schedule(epsilon, D).b0 : 1.0;
    const double first = opts.eta ? *opts.eta : default_step(1.0, zmax, b0, D);
    if (!(first > 0.0)) throw std::invalid_argument("checkpoint_grid: eta must be positive");
    const double last = est.kind == EstimatorKind::op
                            ? opts.horizon * make_schedule(epsilon, D).t_stop
                            : opts.vanilla_horizon * std::pow(epsilon, -2.0 * schedule.gamma);
    if (!(last > first)) throw std::invalid_argument("checkpoint_grid: horizon shorter than the first checkpoint");
    return geometric_grid(first, last, opts.grid_ratio);
}

std::size_t default_truncation(const SignalSpec& spec, double eps_min) {
    std::size_t N = std::max<std::size_t>(10000, 2 * covering_length(spec, eps_min, 1));
    if (spec.mode == SignalMode::sparse)
        for (auto k : spec.support) N = std::max(N, k);
    if (spec.mode == SignalMode::explicit_values) N = std::max(N, spec.values.size());
    return N;
}

std::uint64_t cell_key(std::uint64_t master_seed, std::size_t) { return master_seed; }

std::vector<double> risk_curve(const SequenceInstance& inst, std::span<const double> lambdas, const Estimator& est,
                               std::span<const double> times, const MonteCarloOptions& opts) {
    const std::size_t N = inst.z.size();
    if (inst.theta_star.size() != N || lambdas.size() != N)
        throw std::invalid_argument("risk_curve: instance and eigenvalue lengths differ");
    const std::size_t K = times.size();
    std::vector<double> curve(K, 0.0);
    std::vector<double> est_k(K);

    if (est.kind == EstimatorKind::vanilla) {
        for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t k = 0; k < K; ++k) {
                const double d = -std::expm1(-lambdas[j] * times[k]) * inst.z[j] - inst.theta_star[j];
                curve[k] += d * d;
            }
        }
        return curve;
    }

    const int D = est.depth;
    const auto sched = make_schedule(inst.epsilon, D);
    std::vector<double> beta(K);
    IntegratorConfig icfg;
    if (opts.solver != FlowSolver::exact) {
        double zmax = 0.0;
        for (double v : inst.z) zmax = std::max(zmax, std::abs(v));
        icfg.method = opts.solver == FlowSolver::euler ? StepMethod::euler : StepMethod::rk4;
        icfg.eta = opts.eta ? *opts.eta : default_step(lambdas.empty() ? 1.0 : lambdas[0], zmax, sched.b0, D);
        icfg.drift_tol = opts.drift_tol > 0.0 ? opts.drift_tol : (opts.solver == FlowSolver::euler ? 1e-2 : 1e-6);
        icfg.record_times.assign(times.begin(), times.end());
    }
    for (std::size_t j = 0; j < N; ++j) {
        const FlowParams params{lambdas[j], inst.z[j], D, sched.b0};
        const double ts = inst.theta_star[j];
        if (inst.z[j] == 0.0) {
            for (std::size_t k = 0; k < K; ++k) curve[k] += ts * ts;
            continue;
        }
        if (opts.solver == FlowSolver::exact) {
            if (D == 0) {
                for (std::size_t k = 0; k < K; ++k) est_k[k] = twolayer_theta(lambdas[j], inst.z[j], times[k]);
            } else {
                solve_flow_at(params, times, beta, opts.ode);
                for (std::size_t k = 0; k < K; ++k) est_k[k] = theta_from_beta(params, beta[k]);
            }
        } else {
            const auto traj = integrate_flow(params, icfg);
            for (std::size_t k = 0; k < K; ++k) est_k[k] = traj[k].theta();
        }
        for (std::size_t k = 0; k < K; ++k) {
            const double d = est_k[k] - ts;
            curve[k] += d * d;
        }
    }
    return curve;
}

RiskSummary monte_carlo_risk(const SignalSpec& spec, const EigenSchedule& schedule, const Estimator& est,
                             std::size_t n, std::size_t reps, std::uint64_t master_seed,
                             const MonteCarloOptions& opts) {
    if (reps < 1) throw std::invalid_argument("monte_carlo_risk: reps must be at least 1");
    if (n < 2) throw std::invalid_argument("monte_carlo_risk: n must be at least 2");
    if (est.kind == EstimatorKind::op && est.depth < 0)
        throw std::invalid_argument("monte_carlo_risk: depth must be non-negative");
    spec.validate();
    schedule.validate();

    const double eps = 1.0 / std::sqrt(static_cast<double>(n));
    const auto lambdas = build_eigenvalues(schedule);
    const auto theta = build_signal(spec, schedule.N);
    const double tail = signal_tail_energy(spec, schedule.N);
    const auto grid = checkpoint_grid(spec, schedule, est, eps, opts);
    const std::uint64_t key = cell_key(master_seed, n);

    RiskSummary out;
    out.n = n;
    out.reps = reps;
    out.estimator = est;
    out.grid = grid;
    out.rep_risk.assign(reps, 0.0);
    out.rep_t.assign(reps, 0.0);
    std::vector<std::vector<double>> curves(opts.keep_curves ? reps : 0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                SequenceInstance inst;
                inst.epsilon = eps;
                inst.theta_star = theta;
                inst.seed = instance_key(key, r);
                inst.z = add_noise(theta, eps, inst.seed);
                auto curve = risk_curve(inst, lambdas, est, grid, opts);
                for (double& c : curve) c += tail;
                if (grid.size() == 1) {
                    out.rep_t[r] = grid[0];
                    out.rep_risk[r] = curve[0];
                } else {
                    const auto [t_opt, r_opt] = oracle_stopping_search(grid, curve);
                    out.rep_t[r] = t_opt;
                    out.rep_risk[r] = r_opt;
                }
                if (opts.keep_curves) curves[r] = std::move(curve);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(reps);
                return;
            }
        }
    };
    unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, reps));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    out.mean_risk = mean(out.rep_risk);
    out.std_risk = sample_std(out.rep_risk);
    out.oracle_t = mean(out.rep_t);
    if (grid.size() > 1)
        out.boundary_hits = static_cast<std::size_t>(std::count(out.rep_t.begin(), out.rep_t.end(), grid.back()));
    if (opts.keep_curves) {
        out.mean_curve.resize(grid.size());
        std::vector<double> col(reps);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            for (std::size_t r = 0; r < reps; ++r) col[r] = curves[r][k];
            out.mean_curve[k] = mean(col);
        }
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
    out << "estimator,D,p,q,gamma,n,reps,mean_risk,std_risk,oracle_t,exponent,stderr\n";
    for (const auto& row : rows) {
        const auto& s = row.summary;
        out << s.estimator.name() << ','
            << (s.estimator.kind == EstimatorKind::op ? std::to_string(s.estimator.depth) : std::string("NA")) << ','
            << format_double(row.p) << ',' << format_double(row.q) << ',' << format_double(row.gamma) << ','
            << s.n << ',' << s.reps << ',' << format_double(s.mean_risk) << ',' << format_double(s.std_risk) << ','
            << format_double(s.oracle_t) << ',' << (row.fit ? format_double(row.fit->exponent) : "NA") << ','
            << (row.fit ? format_double(row.fit->std_error) : "NA") << '\n';
    }
}

}  // namespace seqflow
