#include "seqflow/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "seqflow/error.hpp"
#include "seqflow/kernel_bridge.hpp"
#include "seqflow/numerics.hpp"
#include "seqflow/random.hpp"

namespace seqflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_output_dir(const std::string& dir) {
    const fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw ConfigError("output_dir '" + dir + "' cannot be created");
    const fs::path probe = p / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw ConfigError("output_dir '" + dir + "' is not writable");
    }
    fs::remove(probe, ec);
    return p;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    return f;
}

void write_text(const fs::path& path, const std::string& text) {
    auto f = open_out(path);
    f << text;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_json(const std::optional<RateFit>& fit) {
    if (!fit) return nullptr;
    return {{"exponent", num(fit->exponent)}, {"intercept", num(fit->intercept)}, {"stderr", num(fit->std_error)}};
}

std::string depth_field(const Estimator& e) {
    return e.kind == EstimatorKind::op ? std::to_string(e.depth) : std::string("NA");
}

template <class Job>
void run_parallel(std::size_t count, unsigned threads, Job job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    unsigned nt = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, std::max<std::size_t>(count, 1)));
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

struct CellRun {
    std::vector<SummaryRow> rows;
    std::vector<SummaryRow> schedule_rows;
    std::vector<EstimatorFit> fits;
};

// Monte Carlo over the n grid for every estimator at one (p, q, gamma).
CellRun run_cell(const ExperimentConfig& cfg, double p, double q, double gamma) {
    ExperimentConfig c = cfg;
    c.p = p;
    c.q = q;
    c.gamma = gamma;
    const SignalSpec spec = signal_spec(c);
    const auto n_max = *std::max_element(c.n_grid.begin(), c.n_grid.end());
    EigenSchedule sched{gamma, c.N ? c.N : default_truncation(spec, 1.0 / std::sqrt(static_cast<double>(n_max)))};
    const MonteCarloOptions opts = monte_carlo_options(c);

    CellRun out;
    for (const auto& est : estimator_list(c)) {
        std::vector<double> ns, risks, ts;
        for (auto n : c.n_grid) {
            SummaryRow row;
            row.p = p;
            row.q = q;
            row.gamma = gamma;
            row.summary = monte_carlo_risk(spec, sched, est, n, c.reps, c.seed, opts);
            ns.push_back(static_cast<double>(n));
            risks.push_back(row.summary.mean_risk);
            ts.push_back(row.summary.oracle_t);
            out.rows.push_back(std::move(row));
            if (c.report_schedule && opts.stopping != StoppingRule::schedule) {
                MonteCarloOptions so = opts;
                so.stopping = StoppingRule::schedule;
                SummaryRow srow;
                srow.p = p;
                srow.q = q;
                srow.gamma = gamma;
                srow.summary = monte_carlo_risk(spec, sched, est, n, c.reps, c.seed, so);
                out.schedule_rows.push_back(std::move(srow));
            }
        }
        EstimatorFit fit;
        fit.estimator = est;
        const bool positive = std::all_of(risks.begin(), risks.end(), [](double r) { return r > 0.0; });
        if (ns.size() >= 3 && positive) {
            fit.risk_fit = loglog_rate_fit(ns, risks);
            if (std::all_of(ts.begin(), ts.end(), [](double t) { return t > 0.0; })) fit.t_fit = loglog_rate_fit(ns, ts);
        }
        const std::size_t first = out.rows.size() - c.n_grid.size();
        for (std::size_t i = first; i < out.rows.size(); ++i) out.rows[i].fit = fit.risk_fit;
        if (!out.schedule_rows.empty() && ns.size() >= 3) {
            std::vector<double> sr;
            const std::size_t sf = out.schedule_rows.size() - c.n_grid.size();
            for (std::size_t i = sf; i < out.schedule_rows.size(); ++i) sr.push_back(out.schedule_rows[i].summary.mean_risk);
            if (std::all_of(sr.begin(), sr.end(), [](double r) { return r > 0.0; })) {
                const auto sfit = loglog_rate_fit(ns, sr);
                for (std::size_t i = sf; i < out.schedule_rows.size(); ++i) out.schedule_rows[i].fit = sfit;
            }
        }
        out.fits.push_back(std::move(fit));
    }
    return out;
}

void write_raw_risks(std::ostream& f, const std::vector<SummaryRow>& rows) {
    f << "estimator,D,p,q,gamma,n,rep,oracle_t,risk\n";
    for (const auto& row : rows) {
        const auto& s = row.summary;
        for (std::size_t r = 0; r < s.rep_risk.size(); ++r) {
            f << s.estimator.name() << ',' << depth_field(s.estimator) << ',' << format_double(row.p) << ','
              << format_double(row.q) << ',' << format_double(row.gamma) << ',' << s.n << ',' << r << ','
              << format_double(s.rep_t[r]) << ',' << format_double(s.rep_risk[r]) << '\n';
        }
    }
}

void write_rates(std::ostream& f, double p, double q, double gamma, const std::vector<EstimatorFit>& fits, bool header) {
    if (header) f << "estimator,D,p,q,gamma,quantity,exponent,intercept,stderr\n";
    for (const auto& fit : fits) {
        auto line = [&](const char* what, const std::optional<RateFit>& rf, double sign) {
            f << fit.estimator.name() << ',' << depth_field(fit.estimator) << ',' << format_double(p) << ','
              << format_double(q) << ',' << format_double(gamma) << ',' << what << ',';
            if (rf) {
                f << format_double(sign * rf->exponent) << ',' << format_double(rf->intercept) << ','
                  << format_double(rf->std_error) << '\n';
            } else {
                f << "NA,NA,NA\n";
            }
        };
        line("risk", fit.risk_fit, 1.0);
        line("oracle_t", fit.t_fit, -1.0);  // reported as growth rate of t
    }
}

json points_json(const std::vector<SummaryRow>& rows, const Estimator& est) {
    json pts = json::array();
    for (const auto& row : rows) {
        const auto& s = row.summary;
        if (!(s.estimator == est)) continue;
        pts.push_back({{"n", s.n},
                       {"mean_risk", num(s.mean_risk)},
                       {"std_risk", num(s.std_risk)},
                       {"sem_risk", num(s.sem())},
                       {"oracle_t", num(s.oracle_t)},
                       {"boundary_hits", s.boundary_hits}});
    }
    return pts;
}

json estimators_json(const CellRun& run) {
    json arr = json::array();
    for (const auto& fit : run.fits) {
        json e{{"estimator", fit.estimator.name()},
               {"label", fit.estimator.label()},
               {"rate", fit_json(fit.risk_fit)},
               {"points", points_json(run.rows, fit.estimator)}};
        if (fit.t_fit) {
            e["oracle_t_growth"] = {{"exponent", num(-fit.t_fit->exponent)}, {"stderr", num(fit.t_fit->std_error)}};
        } else {
            e["oracle_t_growth"] = nullptr;
        }
        if (!run.schedule_rows.empty()) e["schedule_points"] = points_json(run.schedule_rows, fit.estimator);
        arr.push_back(std::move(e));
    }
    return arr;
}

}  // namespace

CompareResult run_compare(const ExperimentConfig& cfg) {
    validate(cfg, "compare");
    const auto dir = prepare_output_dir(cfg.output_dir);
    write_text(dir / "config.txt", to_text(cfg));

    auto run = run_cell(cfg, cfg.p, cfg.q, cfg.gamma);
    {
        auto f = open_out(dir / "raw_risks.csv");
        write_raw_risks(f, run.rows);
    }
    {
        auto f = open_out(dir / "summary.csv");
        write_summary_csv(f, run.rows);
    }
    if (!run.schedule_rows.empty()) {
        auto f = open_out(dir / "schedule_summary.csv");
        write_summary_csv(f, run.schedule_rows);
    }
    {
        auto f = open_out(dir / "rates.csv");
        write_rates(f, cfg.p, cfg.q, cfg.gamma, run.fits, true);
    }
    json j{{"command", "compare"},
           {"seed", cfg.seed},
           {"p", cfg.p},
           {"q", cfg.q},
           {"gamma", cfg.gamma},
           {"D", cfg.D},
           {"reps", cfg.reps},
           {"stopping", cfg.stopping},
           {"estimators", estimators_json(run)}};
    write_text(dir / "summary.json", j.dump(2) + "\n");

    CompareResult out;
    out.rows = std::move(run.rows);
    out.schedule_rows = std::move(run.schedule_rows);
    out.fits = std::move(run.fits);
    return out;
}

TableResult run_table(const ExperimentConfig& cfg) {
    validate(cfg, "table");
    const auto dir = prepare_output_dir(cfg.output_dir);
    write_text(dir / "config.txt", to_text(cfg));

    TableResult out;
    json cells = json::array();
    std::ostringstream rates;
    bool first = true;
    for (double gamma : cfg.gamma_list) {
        for (double p : cfg.p_list) {
            for (double q : cfg.q_list) {
                auto run = run_cell(cfg, p, q, gamma);
                write_rates(rates, p, q, gamma, run.fits, first);
                first = false;
                for (const auto& fit : run.fits) out.cells.push_back({p, q, gamma, fit});
                cells.push_back({{"p", p}, {"q", q}, {"gamma", gamma}, {"estimators", estimators_json(run)}});
                for (auto& r : run.rows) out.rows.push_back(std::move(r));
            }
        }
    }
    {
        auto f = open_out(dir / "raw_risks.csv");
        write_raw_risks(f, out.rows);
    }
    {
        auto f = open_out(dir / "summary.csv");
        write_summary_csv(f, out.rows);
    }
    write_text(dir / "rates.csv", rates.str());
    {
        auto f = open_out(dir / "table.csv");
        f << "estimator,D,p,q,gamma,exponent,stderr,reps\n";
        for (const auto& c : out.cells) {
            f << c.fit.estimator.name() << ',' << depth_field(c.fit.estimator) << ',' << format_double(c.p) << ','
              << format_double(c.q) << ',' << format_double(c.gamma) << ','
              << (c.fit.risk_fit ? format_double(c.fit.risk_fit->exponent) : "NA") << ','
              << (c.fit.risk_fit ? format_double(c.fit.risk_fit->std_error) : "NA") << ',' << cfg.reps << '\n';
        }
    }
    json j{{"command", "table"}, {"seed", cfg.seed}, {"D", cfg.D}, {"reps", cfg.reps}, {"cells", cells}};
    write_text(dir / "summary.json", j.dump(2) + "\n");
    return out;
}

EigtraceResult run_eigtrace(const ExperimentConfig& cfg) {
    validate(cfg, "eigtrace");
    const auto dir = prepare_output_dir(cfg.output_dir);
    write_text(dir / "config.txt", to_text(cfg));

    const SignalSpec spec = signal_spec(cfg);
    EigtraceResult out;
    out.epsilon = 1.0 / std::sqrt(static_cast<double>(cfg.trace_n));
    std::size_t N = cfg.N ? cfg.N : default_truncation(spec, out.epsilon);
    N = std::max(N, cfg.window_hi);
    const EigenSchedule sched{cfg.gamma, N};
    const auto lambdas = build_eigenvalues(sched);
    const auto theta = build_signal(spec, N);
    const auto z = add_noise(theta, out.epsilon, instance_key(cfg.seed, 0));
    out.schedule = make_schedule(out.epsilon, cfg.D);
    MonteCarloOptions opts = monte_carlo_options(cfg);
    opts.stopping = StoppingRule::oracle;
    out.grid = checkpoint_grid(spec, sched, Estimator::op(cfg.D), out.epsilon, opts);

    std::vector<double> grid0{0.0};
    grid0.insert(grid0.end(), out.grid.begin(), out.grid.end());
    double zmax = 0.0;
    for (double v : z) zmax = std::max(zmax, std::abs(v));

    const std::size_t W = cfg.window_hi - cfg.window_lo + 1;
    out.traces.resize(W);
    out.marks.resize(W);
    run_parallel(W, cfg.threads, [&](std::size_t w) {
        const std::size_t j = cfg.window_lo + w;
        const FlowParams params{lambdas[j - 1], z[j - 1], cfg.D, out.schedule.b0};
        Trajectory traj;
        if (opts.solver == FlowSolver::exact) {
            std::vector<double> beta(grid0.size());
            solve_flow_at(params, grid0, beta, opts.ode);
            for (std::size_t k = 0; k < grid0.size(); ++k) traj.push_back(state_from_beta(params, beta[k], grid0[k]));
        } else {
            IntegratorConfig icfg;
            icfg.method = opts.solver == FlowSolver::euler ? StepMethod::euler : StepMethod::rk4;
            icfg.eta = cfg.eta_override ? *cfg.eta_override : default_step(lambdas[0], zmax, out.schedule.b0, cfg.D);
            icfg.drift_tol = opts.solver == FlowSolver::euler ? 1e-2 : 1e-6;
            icfg.record_times = grid0;
            traj = integrate_flow(params, icfg);
        }
        out.traces[w] = std::move(traj);
        TraceMark& m = out.marks[w];
        m.component = j;
        m.lambda = lambdas[j - 1];
        m.theta_star = theta[j - 1];
        m.z = z[j - 1];
        m.initial_eigen_term = initial_state(params).eigen_term();
        m.signal_mark =
            cfg.mark_constant * std::pow(std::abs(theta[j - 1]), (cfg.D + 1.0) / (cfg.D + 2.0));
    });

    {
        auto f = open_out(dir / "eigtrace.csv");
        for (std::size_t w = 0; w < W; ++w) write_trajectory_csv(f, cfg.window_lo + w, out.traces[w], w == 0);
    }
    {
        auto f = open_out(dir / "marks.csv");
        f << "component_index,lambda,theta_star,z,initial_eigen_term,signal_mark,is_signal\n";
        for (const auto& m : out.marks) {
            f << m.component << ',' << format_double(m.lambda) << ',' << format_double(m.theta_star) << ','
              << format_double(m.z) << ',' << format_double(m.initial_eigen_term) << ','
              << format_double(m.signal_mark) << ',' << (m.theta_star != 0.0 ? 1 : 0) << '\n';
        }
    }
    json j{{"command", "eigtrace"},
           {"seed", cfg.seed},
           {"n", cfg.trace_n},
           {"epsilon", out.epsilon},
           {"D", cfg.D},
           {"b0", out.schedule.b0},
           {"t_stop", out.schedule.t_stop},
           {"window", {cfg.window_lo, cfg.window_hi}},
           {"checkpoints", grid0.size()}};
    write_text(dir / "summary.json", j.dump(2) + "\n");
    return out;
}

std::uint64_t kernel_design_seed(std::uint64_t master_seed, std::size_t n, std::size_t s) {
    return derive_key(derive_key(master_seed, n), s);
}

KernelResult run_kernel2d(const ExperimentConfig& cfg) {
    validate(cfg, "kernel2d");
    const auto dir = prepare_output_dir(cfg.output_dir);
    write_text(dir / "config.txt", to_text(cfg));

    KernelResult out;
    out.M = cfg.kernel_M ? cfg.kernel_M : default_basis_size(cfg.kernel_d, cfg.kernel_r);
    const FourierDesign basis = fourier_index_order(cfg.kernel_d, cfg.kernel_r, out.M);
    const SineTarget target{cfg.kernel_freq, 0};
    const auto grid_fixed = geometric_grid(0.1, cfg.kernel_t_fixed_max, cfg.grid_ratio);
    const auto grid_adapt = geometric_grid(0.1, cfg.kernel_t_adaptive_max, cfg.grid_ratio);

    std::vector<std::size_t> sizes{cfg.kernel_n};
    for (auto n : cfg.kernel_n_sweep)
        if (std::find(sizes.begin(), sizes.end(), n) == sizes.end()) sizes.push_back(n);
    const std::size_t S = cfg.kernel_seeds;

    struct Job {
        KernelSeedResult res;
        KernelTrajectory fixed, adaptive;
        std::vector<double> fixed_hold, adaptive_hold;
    };
    std::vector<Job> jobs(sizes.size() * S);
    run_parallel(jobs.size(), cfg.threads, [&](std::size_t i) {
        const std::size_t n = sizes[i / S], s = i % S;
        const std::uint64_t seed = kernel_design_seed(cfg.seed, n, s);
        const auto design = sample_torus_design(cfg.kernel_d, n, cfg.kernel_sigma, seed, target);
        const std::size_t nh = cfg.kernel_holdout_n ? cfg.kernel_holdout_n : n;
        const auto hold = sample_torus_design(cfg.kernel_d, nh, 0.0, derive_key(seed, 0x486F6C64ULL), target);
        const Eigen::MatrixXd E_hold = basis_matrix(hold.X, basis);
        const auto sys = make_feature_system(design, basis);

        Job& job = jobs[i];
        FixedKernelOptions fo;
        fo.solver = cfg.kernel_solver == "gd" ? KernelSolver::gd : KernelSolver::exact;
        job.fixed = fit_fixed_kernel_gf(sys, grid_fixed, fo);
        AdaptiveKernelOptions ao;
        ao.depth = cfg.kernel_D;
        ao.b0 = cfg.kernel_b0;
        job.adaptive = fit_adaptive_diagonal(sys, grid_adapt, ao);
        job.fixed_hold = holdout_risk(job.fixed, E_hold, hold.y);
        job.adaptive_hold = holdout_risk(job.adaptive, E_hold, hold.y);
        const auto fl2 = exact_l2_risk(job.fixed, basis, target);
        const auto al2 = exact_l2_risk(job.adaptive, basis, target);
        const auto [ft, fr] = oracle_stopping_search(grid_fixed, job.fixed_hold);
        const auto [at, ar] = oracle_stopping_search(grid_adapt, job.adaptive_hold);
        auto& r = job.res;
        r.n = n;
        r.seed_index = s;
        r.fixed_t = ft;
        r.fixed_holdout = fr;
        r.adaptive_t = at;
        r.adaptive_holdout = ar;
        r.fixed_l2 = fl2[static_cast<std::size_t>(std::find(grid_fixed.begin(), grid_fixed.end(), ft) - grid_fixed.begin())];
        r.adaptive_l2 = al2[static_cast<std::size_t>(std::find(grid_adapt.begin(), grid_adapt.end(), at) - grid_adapt.begin())];
    });

    for (const auto& job : jobs) out.seeds.push_back(job.res);
    for (std::size_t s = 0; s < S; ++s)
        if (jobs[s].res.adaptive_holdout < jobs[s].res.fixed_holdout) ++out.adaptive_wins;

    {
        auto f = open_out(dir / "kernel.csv");
        for (std::size_t s = 0; s < S; ++s) {
            write_kernel_csv(f, "fixed", s, jobs[s].fixed, jobs[s].fixed_hold, s == 0);
            write_kernel_csv(f, "adaptive", s, jobs[s].adaptive, jobs[s].adaptive_hold, false);
        }
    }
    {
        auto f = open_out(dir / "snapshots.csv");
        for (std::size_t s = 0; s < S; ++s) {
            write_coefficient_snapshots(f, "fixed", s, jobs[s].fixed, basis, cfg.kernel_snapshot_top, s == 0);
            write_coefficient_snapshots(f, "adaptive", s, jobs[s].adaptive, basis, cfg.kernel_snapshot_top, false);
        }
    }
    {
        auto f = open_out(dir / "kernel_summary.csv");
        f << "n,seed,method,oracle_t,oracle_holdout_risk,oracle_l2_risk\n";
        for (const auto& r : out.seeds) {
            f << r.n << ',' << r.seed_index << ",fixed," << format_double(r.fixed_t) << ','
              << format_double(r.fixed_holdout) << ',' << format_double(r.fixed_l2) << '\n';
            f << r.n << ',' << r.seed_index << ",adaptive," << format_double(r.adaptive_t) << ','
              << format_double(r.adaptive_holdout) << ',' << format_double(r.adaptive_l2) << '\n';
        }
    }
    json sweep = json::array();
    {
        auto f = open_out(dir / "sweep.csv");
        f << "n,method,seeds,mean_oracle_risk,std_oracle_risk,sem_oracle_risk,mean_oracle_l2_risk,sem_oracle_l2_risk\n";
        std::vector<std::size_t> sorted = sizes;
        std::sort(sorted.begin(), sorted.end());
        for (const char* method : {"fixed", "adaptive"}) {
            const bool fixed = std::string(method) == "fixed";
            std::vector<double> ns, means, l2_means;
            for (auto n : sorted) {
                std::vector<double> v, l2;
                for (const auto& r : out.seeds)
                    if (r.n == n) {
                        v.push_back(fixed ? r.fixed_holdout : r.adaptive_holdout);
                        l2.push_back(fixed ? r.fixed_l2 : r.adaptive_l2);
                    }
                const double root = std::sqrt(static_cast<double>(v.size()));
                KernelSweepPoint pt{n, method, mean(v), v.size() > 1 ? sample_std(v) : 0.0, 0.0};
                pt.sem = pt.std / root;
                pt.l2_mean = mean(l2);
                pt.l2_sem = (l2.size() > 1 ? sample_std(l2) : 0.0) / root;
                f << n << ',' << method << ',' << v.size() << ',' << format_double(pt.mean) << ','
                  << format_double(pt.std) << ',' << format_double(pt.sem) << ',' << format_double(pt.l2_mean) << ','
                  << format_double(pt.l2_sem) << '\n';
                ns.push_back(static_cast<double>(n));
                means.push_back(pt.mean);
                l2_means.push_back(pt.l2_mean);
                out.sweep.push_back(pt);
            }
            json m{{"method", method}, {"n", ns}, {"mean_oracle_risk", means}, {"mean_oracle_l2_risk", l2_means}};
            if (ns.size() >= 3) {
                m["rate"] = fit_json(loglog_rate_fit(ns, means));
            } else if (ns.size() == 2) {
                m["rate"] = {{"exponent", num(-std::log(means[1] / means[0]) / std::log(ns[1] / ns[0]))}};
            } else {
                m["rate"] = nullptr;
            }
            sweep.push_back(std::move(m));
        }
    }
    json j{{"command", "kernel2d"},
           {"seed", cfg.seed},
           {"d", cfg.kernel_d},
           {"n", cfg.kernel_n},
           {"sigma", cfg.kernel_sigma},
           {"r", cfg.kernel_r},
           {"M", out.M},
           {"seeds", S},
           {"adaptive_wins", out.adaptive_wins},
           {"sweep", sweep}};
    write_text(dir / "summary.json", j.dump(2) + "\n");
    return out;
}

SpectrumReport run_spectrum(const SpectrumOptions& opts) {
    if (opts.input.empty()) throw ConfigError("spectrum: --input is required");
    if (opts.target.empty()) throw ConfigError("spectrum: --target is required");
    if (opts.out.empty()) throw ConfigError("spectrum: --out is required");
    if (opts.max_basis < 1) throw ConfigError("spectrum: --max-basis must be >= 1");

    const auto raw = ingest_csv(opts.input, opts.target);
    auto norm = normalize_to_torus(raw);
    SpectrumReport rep;
    rep.n = norm.data.n();
    rep.d = norm.data.d();
    rep.dropped_rows = raw.dropped_count;
    rep.dropped_features = norm.dropped_features;
    rep.warnings = norm.warnings;
    if (rep.n < 10) throw ConfigError("spectrum: need at least 10 usable rows, got " + std::to_string(rep.n));
    if (rep.d < 1) throw ConfigError("spectrum: no non-constant feature columns");
    rep.r = opts.r ? *opts.r : rep.d / 2.0 + 1.0;
    if (!(rep.r > rep.d / 2.0))
        throw ConfigError("spectrum: --r must exceed d/2 = " + format_double(rep.d / 2.0));

    const auto basis = fourier_index_order(static_cast<int>(rep.d), rep.r, opts.max_basis);
    rep.spectrum = empirical_coefficients(norm.data, basis, opts.threads);
    for (const auto& e : rep.spectrum.entries)
        if (std::abs(e.coefficient) > rep.spectrum.noise_floor) ++rep.above_noise_floor;

    {
        std::ofstream f(opts.out, std::ios::binary);
        if (!f) throw ConfigError("spectrum: cannot write '" + opts.out + "'");
        write_spectrum_csv(f, rep.spectrum);
    }
    json maps = json::array();
    for (const auto& m : norm.maps) maps.push_back({{"feature", m.name}, {"min", m.min}, {"max", m.max}});
    json topk = json::object();
    for (std::size_t k : {1, 10, 100, 1000})
        if (k <= rep.spectrum.entries.size()) topk[std::to_string(k)] = rep.spectrum.top_k_energy_fraction(k);
    json j{{"command", "spectrum"},
           {"input", opts.input},
           {"target", opts.target},
           {"n", rep.n},
           {"d", rep.d},
           {"dropped_rows", rep.dropped_rows},
           {"dropped_features", rep.dropped_features},
           {"r", rep.r},
           {"basis_count", basis.index_list.size()},
           {"total_energy", rep.spectrum.total_energy},
           {"target_energy", rep.spectrum.target_energy},
           {"noise_floor", rep.spectrum.noise_floor},
           {"above_noise_floor", rep.above_noise_floor},
           {"top_k_energy_fraction", topk},
           {"feature_maps", maps}};
    std::ofstream f(opts.out + ".json", std::ios::binary);
    if (!f) throw ConfigError("spectrum: cannot write '" + opts.out + ".json'");
    f << j.dump(2) << "\n";
    return rep;
}

}  // namespace seqflow
