#ifndef SEQFLOW_SEQUENCE_CORE_HPP
#define SEQFLOW_SEQUENCE_CORE_HPP

// Truth signals, eigenvalue schedules and noisy instances of the Gaussian
// sequence model z_j = theta*_j + xi_j, truncated to the first N components.
//
// Indices in the public API are 1-based where they name a sequence component
// (support sets, J_sig, max_jsig); vectors are stored 0-based as usual.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace seqflow {

enum class SignalMode { power_law, sparse, explicit_values };

/// Truth sequence description.
///
/// power_law: |theta*_{l(j)}| = j^{-(p+1)/2} with the injective index map
/// l(j) = round(j^q), collisions advanced to the next unoccupied index.
/// sparse: `magnitude` at each 1-based index in `support`.
/// explicit_values: `values` placed literally from index 1.
struct SignalSpec {
    SignalMode mode = SignalMode::power_law;
    double p = 1.0;
    double q = 1.0;
    std::vector<std::size_t> support;
    double magnitude = 1.0;
    std::vector<double> values;

    static SignalSpec power_law(double p, double q);
    static SignalSpec sparse(std::vector<std::size_t> support, double magnitude);
    static SignalSpec explicit_values(std::vector<double> values);

    // Throws std::invalid_argument on p <= 0, q < 1, or repeated/zero support indices.
    void validate() const;
};

struct EigenSchedule {
    double gamma = 2.0;
    std::size_t N = 10000;

    void validate() const;
};

struct SequenceInstance {
    double epsilon = 0.0;
    std::vector<double> theta_star;
    std::vector<double> z;
    std::uint64_t seed = 0;
};

struct StructureReport {
    double phi_of_delta = 0.0;
    double psi_of_delta = 0.0;
    std::vector<std::size_t> jsig;  // 1-based, ascending
    std::size_t max_jsig = 0;       // 0 when jsig is empty
    double kappa_hat = 0.0;         // NaN when undefined (delta >= 1 or empty jsig)
};

struct PhiPsiExponents {
    double phi_exponent = 0.0;
    double psi_exponent = 0.0;
};

/// lambda_j = j^{-gamma}, j = 1..N. Rejects gamma <= 1.
std::vector<double> build_eigenvalues(const EigenSchedule& schedule);

/// Power-law index map l(1), l(2), ... for every j with l(j) <= limit (1-based).
/// Throws if collision resolution runs past `limit`.
std::vector<std::size_t> power_law_index_map(double q, std::size_t limit);

/// Dense truth vector of length N.
std::vector<double> build_signal(const SignalSpec& spec, std::size_t N);

/// Energy sum_{j > N} (theta*_j)^2 that a length-N truncation leaves out.
double signal_tail_energy(const SignalSpec& spec, std::size_t N);

/// Smallest N >= floor that holds every component with |theta*_j| >= threshold.
std::size_t covering_length(const SignalSpec& spec, double threshold, std::size_t floor);

/// Noise key for repetition `rep` of an experiment keyed by `seed`.
std::uint64_t instance_key(std::uint64_t seed, std::uint64_t rep);

/// z = theta* + eps * g, g_j drawn from the counter stream keyed by `key` at index j.
std::vector<double> add_noise(std::span<const double> theta_star, double epsilon, std::uint64_t key);

SequenceInstance sample_instance(const SignalSpec& spec, const EigenSchedule& schedule, double epsilon,
                                 std::uint64_t seed);

StructureReport structure_report(std::span<const double> theta_star, double delta);

/// Log-log slopes of Phi(delta) and Psi(delta) over the grid (power-law signals only).
PhiPsiExponents phi_psi_rate_check(const SignalSpec& spec, std::span<const double> delta_grid);

}  // namespace seqflow

#endif  // SEQFLOW_SEQUENCE_CORE_HPP
