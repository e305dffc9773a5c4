#ifndef SEQFLOW_EXPERIMENTS_HPP
#define SEQFLOW_EXPERIMENTS_HPP

// Experiment runners behind the CLI subcommands. Each runner validates the
// config, then writes its artifacts into cfg.output_dir:
//   config.txt      canonical snapshot of every key
//   summary.json    machine-readable summary (std and sem per point)
// plus the CSV files listed per runner.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "seqflow/config.hpp"
#include "seqflow/flow_dynamics.hpp"
#include "seqflow/risk_analysis.hpp"
#include "seqflow/spectrum.hpp"

namespace seqflow {

struct EstimatorFit {
    Estimator estimator;
    std::optional<RateFit> risk_fit;  // risk ~ n^{-exponent}
    std::optional<RateFit> t_fit;     // fitted on oracle_t; t ~ n^{-exponent}, so the growth rate is -exponent
};

struct CompareResult {
    std::vector<SummaryRow> rows;           // one per (estimator, n)
    std::vector<SummaryRow> schedule_rows;  // when report_schedule
    std::vector<EstimatorFit> fits;
};

/// raw_risks.csv, summary.csv, rates.csv (+ schedule_summary.csv).
CompareResult run_compare(const ExperimentConfig& cfg);

struct TableCell {
    double p = 0.0, q = 0.0, gamma = 0.0;
    EstimatorFit fit;
};

struct TableResult {
    std::vector<TableCell> cells;
    std::vector<SummaryRow> rows;
};

/// raw_risks.csv, summary.csv, table.csv.
TableResult run_table(const ExperimentConfig& cfg);

struct TraceMark {
    std::size_t component = 0;  // 1-based
    double lambda = 0.0;
    double theta_star = 0.0;
    double z = 0.0;
    double initial_eigen_term = 0.0;
    double signal_mark = 0.0;  // mark_constant * |theta*|^{(D+1)/(D+2)}
};

struct EigtraceResult {
    double epsilon = 0.0;
    Schedule schedule;
    std::vector<double> grid;
    std::vector<Trajectory> traces;  // one per window component
    std::vector<TraceMark> marks;
};

/// eigtrace.csv (trajectory columns) and marks.csv.
EigtraceResult run_eigtrace(const ExperimentConfig& cfg);

struct KernelSeedResult {
    std::size_t n = 0;
    std::size_t seed_index = 0;
    double fixed_t = 0.0, fixed_holdout = 0.0, fixed_l2 = 0.0;
    double adaptive_t = 0.0, adaptive_holdout = 0.0, adaptive_l2 = 0.0;
};

struct KernelSweepPoint {
    std::size_t n = 0;
    std::string method;
    double mean = 0.0, std = 0.0, sem = 0.0;  // holdout risk at the holdout-oracle time
    double l2_mean = 0.0, l2_sem = 0.0;       // exact L2 risk at that same time
};

struct KernelResult {
    std::size_t M = 0;
    std::vector<KernelSeedResult> seeds;  // main n first, then the other sweep sizes
    std::vector<KernelSweepPoint> sweep;
    std::size_t adaptive_wins = 0;  // at the main n
};

/// kernel.csv, snapshots.csv, kernel_summary.csv, sweep.csv.
KernelResult run_kernel2d(const ExperimentConfig& cfg);

struct SpectrumOptions {
    std::string input;
    std::string target;
    std::optional<double> r;  // default d/2 + 1
    std::size_t max_basis = 20000;
    std::string out;
    unsigned threads = 1;
};

struct SpectrumReport {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t dropped_rows = 0;
    std::vector<std::string> dropped_features;
    std::vector<std::string> warnings;
    double r = 0.0;
    CoefficientSpectrum spectrum;
    std::size_t above_noise_floor = 0;
};

/// Writes the spectrum CSV to opts.out and a summary to opts.out + ".json".
/// ConfigError for bad options or fewer than 10 usable rows; IngestError from ingestion.
SpectrumReport run_spectrum(const SpectrumOptions& opts);

/// Seed of training design `s` for sample size n in the kernel demo.
std::uint64_t kernel_design_seed(std::uint64_t master_seed, std::size_t n, std::size_t s);

}  // namespace seqflow

#endif  // SEQFLOW_EXPERIMENTS_HPP
