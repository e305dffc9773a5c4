#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqflow/config.hpp"
#include "seqflow/error.hpp"
#include "seqflow/experiments.hpp"
#include "seqflow/numerics.hpp"

using namespace seqflow;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<unsigned> threads;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "key = value config file");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--threads", f.threads, "worker threads (0 = all cores)");
    sub->add_option("--set", f.overrides, "override, key=value (repeatable)");
}

ExperimentConfig build_config(const CommonFlags& f) {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    for (const auto& o : f.overrides) apply_override(cfg, o);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (f.threads) cfg.threads = *f.threads;
    return cfg;
}

void print_fits(const std::vector<EstimatorFit>& fits) {
    for (const auto& fit : fits) {
        if (fit.risk_fit) {
            std::printf("%-8s rate %.4f (stderr %.4f)", fit.estimator.label().c_str(), fit.risk_fit->exponent,
                        fit.risk_fit->std_error);
        } else {
            std::printf("%-8s rate NA", fit.estimator.label().c_str());
        }
        if (fit.t_fit) std::printf("  oracle t ~ n^%.3f", -fit.t_fit->exponent);
        std::printf("\n");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Early-stopped and over-parameterized gradient flow experiments"};
    app.require_subcommand(1);

    CommonFlags compare_f, table_f, eig_f, kernel_f;
    auto* compare = app.add_subcommand("compare", "rate comparison over the n grid");
    add_common(compare, compare_f);
    auto* table = app.add_subcommand("table", "rate table over p_list x q_list x gamma_list");
    add_common(table, table_f);
    auto* eig = app.add_subcommand("eigtrace", "eigen-term trajectories for a component window");
    add_common(eig, eig_f);
    auto* kernel = app.add_subcommand("kernel2d", "fixed vs adaptive kernel regression on the torus");
    add_common(kernel, kernel_f);

    SpectrumOptions sopts;
    std::optional<double> s_r;
    CommonFlags spec_f;
    auto* spectrum = app.add_subcommand("spectrum", "empirical Fourier spectrum of a CSV target");
    spectrum->add_option("--input", sopts.input, "input CSV")->required();
    spectrum->add_option("--target", sopts.target, "target column")->required();
    spectrum->add_option("--r", s_r, "smoothness exponent (default d/2 + 1)");
    spectrum->add_option("--max-basis", sopts.max_basis, "number of basis functions");
    spectrum->add_option("--out", sopts.out, "output CSV")->required();
    spectrum->add_option("--threads", spec_f.threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (spectrum->parsed()) {
            sopts.r = s_r;
            sopts.threads = spec_f.threads.value_or(1);
            const auto rep = run_spectrum(sopts);
            for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            std::printf("n=%zu d=%zu dropped_rows=%zu basis=%zu r=%g\n", rep.n, rep.d, rep.dropped_rows,
                        rep.spectrum.entries.size(), rep.r);
            std::printf("energy %.6g of %.6g (mean y^2); noise floor %.3g; %zu coefficients above it\n",
                        rep.spectrum.total_energy, rep.spectrum.target_energy, rep.spectrum.noise_floor,
                        rep.above_noise_floor);
            std::printf("top-10 energy fraction %.4f, top-100 %.4f\n", rep.spectrum.top_k_energy_fraction(10),
                        rep.spectrum.top_k_energy_fraction(100));
            return 0;
        }
        if (compare->parsed()) {
            const auto res = run_compare(build_config(compare_f));
            for (const auto& row : res.rows)
                std::printf("%-8s n=%-6zu risk %.6g +- %.3g  oracle t %.4g\n", row.summary.estimator.label().c_str(),
                            row.summary.n, row.summary.mean_risk, row.summary.sem(), row.summary.oracle_t);
            print_fits(res.fits);
            return 0;
        }
        if (table->parsed()) {
            const auto res = run_table(build_config(table_f));
            for (const auto& c : res.cells)
                std::printf("p=%g q=%g gamma=%g %s: %s\n", c.p, c.q, c.gamma, c.fit.estimator.label().c_str(),
                            c.fit.risk_fit ? format_double(c.fit.risk_fit->exponent).c_str() : "NA");
            return 0;
        }
        if (eig->parsed()) {
            const auto cfg = build_config(eig_f);
            const auto res = run_eigtrace(cfg);
            std::printf("eps=%.4g b0=%.4g t_stop=%.4g, %zu components x %zu checkpoints written to %s\n",
                        res.epsilon, res.schedule.b0, res.schedule.t_stop, res.traces.size(), res.grid.size() + 1,
                        cfg.output_dir.c_str());
            return 0;
        }
        if (kernel->parsed()) {
            const auto res = run_kernel2d(build_config(kernel_f));
            for (const auto& s : res.seeds)
                std::printf("n=%zu seed %zu: fixed %.4g @%.3g  adaptive %.4g @%.3g\n", s.n, s.seed_index,
                            s.fixed_holdout, s.fixed_t, s.adaptive_holdout, s.adaptive_t);
            std::printf("M=%zu, adaptive wins %zu\n", res.M, res.adaptive_wins);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const IngestError& e) {
        std::fprintf(stderr, "input error (%s): %s\n", to_string(e.code()), e.what());
        return exit_config;
    } catch (const NumericalAbort& e) {
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return exit_numeric;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return exit_config;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
