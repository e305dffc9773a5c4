#ifndef SEQFLOW_CONFIG_HPP
#define SEQFLOW_CONFIG_HPP

// Experiment configuration: a flat `key = value` file, '#' starts a comment.
// Lists are comma separated; integer lists also accept `first:last:step`.
// Unknown keys and malformed values raise ConfigError.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqflow/risk_analysis.hpp"
#include "seqflow/sequence_core.hpp"

namespace seqflow {

struct ExperimentConfig {
    // sequence model
    double p = 1.0;
    double q = 2.0;
    double gamma = 1.5;
    int D = 0;
    std::vector<std::size_t> n_grid{2000, 2200, 2400, 2600, 2800, 3000, 3200, 3400, 3600, 3800, 4000};
    std::size_t reps = 64;
    std::uint64_t seed = 0;
    std::vector<std::string> estimators{"op", "vanilla"};  // "op" means op with depth D
    std::string output_dir = "runs/out";
    std::optional<double> eta_override;
    std::size_t N = 0;  // 0: automatic truncation
    std::string signal = "power_law";  // power_law | sparse | zero
    std::vector<std::size_t> sparse_support;
    std::size_t sparse_s = 10;  // used when sparse_support is empty: indices 1..s
    double sparse_magnitude = 1.0;

    // stopping and solver
    std::string stopping = "oracle";  // oracle | schedule | fixed
    double fixed_t = 0.0;
    std::string solver = "exact";  // exact | euler | rk4
    double horizon = 10.0;
    double vanilla_horizon = 10.0;
    double grid_ratio = 1.2;
    double rtol = 1e-8;
    bool report_schedule = false;
    unsigned threads = 1;

    // table
    std::vector<double> p_list{1.0};
    std::vector<double> q_list{1.0};
    std::vector<double> gamma_list{2.0};

    // eigtrace
    std::size_t trace_n = 4000;
    std::size_t window_lo = 1;
    std::size_t window_hi = 200;
    double mark_constant = 1.0;

    // kernel2d
    int kernel_d = 2;
    std::size_t kernel_n = 1000;
    double kernel_sigma = 0.1;
    double kernel_r = 2.0;
    std::size_t kernel_M = 0;  // 0: eigenvalue-ratio rule
    std::size_t kernel_seeds = 16;
    double kernel_freq = 7.5;
    std::size_t kernel_holdout_n = 0;  // 0: same as the training size
    double kernel_t_fixed_max = 1e7;
    double kernel_t_adaptive_max = 400.0;
    int kernel_D = 0;
    double kernel_b0 = 1.0;
    std::string kernel_solver = "exact";  // fixed-kernel solver: exact | gd
    std::vector<std::size_t> kernel_n_sweep{1000, 2000};
    std::size_t kernel_snapshot_top = 10;
};

/// Sets one key from its textual value.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Applies a `key=value` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");
ExperimentConfig load_config(const std::string& path);

/// Canonical `key = value` text of every key; parse_config_text(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);

/// Checks the knobs a subcommand uses ("compare", "table", "eigtrace", "kernel2d"). Throws ConfigError.
void validate(const ExperimentConfig& cfg, const std::string& command);

SignalSpec signal_spec(const ExperimentConfig& cfg);
std::vector<Estimator> estimator_list(const ExperimentConfig& cfg);
MonteCarloOptions monte_carlo_options(const ExperimentConfig& cfg);

}  // namespace seqflow

#endif  // SEQFLOW_CONFIG_HPP
