#include "seqflow/sequence_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "seqflow/numerics.hpp"
#include "seqflow/random.hpp"

namespace seqflow {

SignalSpec SignalSpec::power_law(double p, double q) {
    SignalSpec s;
    s.mode = SignalMode::power_law;
    s.p = p;
    s.q = q;
    s.validate();
    return s;
}

SignalSpec SignalSpec::sparse(std::vector<std::size_t> support, double magnitude) {
    SignalSpec s;
    s.mode = SignalMode::sparse;
    s.support = std::move(support);
    s.magnitude = magnitude;
    s.validate();
    return s;
}

SignalSpec SignalSpec::explicit_values(std::vector<double> values) {
    SignalSpec s;
    s.mode = SignalMode::explicit_values;
    s.values = std::move(values);
    s.validate();
    return s;
}

void SignalSpec::validate() const {
    switch (mode) {
        case SignalMode::power_law:
            if (!(p > 0.0)) throw std::invalid_argument("signal: p must be positive");
            if (!(q >= 1.0)) throw std::invalid_argument("signal: q must be at least 1");
            break;
        case SignalMode::sparse: {
            std::unordered_set<std::size_t> seen;
            for (std::size_t idx : support) {
                if (idx == 0) throw std::invalid_argument("signal: support indices are 1-based");
                if (!seen.insert(idx).second)
                    throw std::invalid_argument("signal: repeated support index " + std::to_string(idx));
            }
            if (!std::isfinite(magnitude)) throw std::invalid_argument("signal: magnitude must be finite");
            break;
        }
        case SignalMode::explicit_values:
            for (double v : values)
                if (!std::isfinite(v)) throw std::invalid_argument("signal: explicit values must be finite");
            break;
    }
}

void EigenSchedule::validate() const {
    if (!(gamma > 1.0)) throw std::invalid_argument("eigenvalues: gamma must exceed 1 (summability)");
    if (N < 1) throw std::invalid_argument("eigenvalues: N must be positive");
}

std::vector<double> build_eigenvalues(const EigenSchedule& schedule) {
    schedule.validate();
    std::vector<double> lambdas(schedule.N);
    for (std::size_t j = 0; j < schedule.N; ++j)
        lambdas[j] = std::pow(static_cast<double>(j + 1), -schedule.gamma);
    return lambdas;
}

std::vector<std::size_t> power_law_index_map(double q, std::size_t limit) {
    if (!(q >= 1.0)) throw std::invalid_argument("index map: q must be at least 1");
    std::vector<std::size_t> map;
    std::vector<bool> occupied(limit + 1, false);
    for (std::size_t j = 1;; ++j) {
        const double target_real = std::round(std::pow(static_cast<double>(j), q));
        if (target_real > static_cast<double>(limit)) break;
        std::size_t target = static_cast<std::size_t>(target_real);
        while (target <= limit && occupied[target]) ++target;
        if (target > limit)
            throw std::invalid_argument("index map: collision resolution for j=" + std::to_string(j) +
                                        " exhausts N=" + std::to_string(limit));
        occupied[target] = true;
        map.push_back(target);
    }
    return map;
}

std::vector<double> build_signal(const SignalSpec& spec, std::size_t N) {
    spec.validate();
    std::vector<double> theta(N, 0.0);
    switch (spec.mode) {
        case SignalMode::power_law: {
            const auto map = power_law_index_map(spec.q, N);
            const double expo = -(spec.p + 1.0) / 2.0;
            for (std::size_t j = 0; j < map.size(); ++j)
                theta[map[j] - 1] = std::pow(static_cast<double>(j + 1), expo);
            break;
        }
        case SignalMode::sparse:
            for (std::size_t idx : spec.support) {
                if (idx > N)
                    throw std::invalid_argument("signal: support index " + std::to_string(idx) +
                                                " exceeds N=" + std::to_string(N));
                theta[idx - 1] = spec.magnitude;
            }
            break;
        case SignalMode::explicit_values:
            for (std::size_t i = 0; i < spec.values.size(); ++i) {
                if (i < N) {
                    theta[i] = spec.values[i];
                } else if (spec.values[i] != 0.0) {
                    throw std::invalid_argument("signal: explicit values have nonzero entries beyond N");
                }
            }
            break;
    }
    return theta;
}

double signal_tail_energy(const SignalSpec& spec, std::size_t N) {
    spec.validate();
    switch (spec.mode) {
        case SignalMode::power_law: {
            // l is strictly increasing for q >= 1, so the omitted components are
            // exactly j > J with J = #{j : l(j) <= N}.
            const std::size_t J = power_law_index_map(spec.q, N).size();
            return zeta_tail(spec.p + 1.0, J + 1);
        }
        case SignalMode::sparse: {
            double e = 0.0;
            for (std::size_t idx : spec.support)
                if (idx > N) e += spec.magnitude * spec.magnitude;
            return e;
        }
        case SignalMode::explicit_values: {
            double e = 0.0;
            for (std::size_t i = N; i < spec.values.size(); ++i) e += spec.values[i] * spec.values[i];
            return e;
        }
    }
    return 0.0;
}

std::size_t covering_length(const SignalSpec& spec, double threshold, std::size_t floor) {
    spec.validate();
    if (!(threshold > 0.0)) throw std::invalid_argument("covering_length: threshold must be positive");
    std::size_t last = 0;
    switch (spec.mode) {
        case SignalMode::power_law: {
            const double expo = -(spec.p + 1.0) / 2.0;
            std::size_t J = 0;
            while (std::pow(static_cast<double>(J + 1), expo) >= threshold) ++J;
            if (J > 0) {
                const double lJ = std::round(std::pow(static_cast<double>(J), spec.q));
                if (lJ > 1e9) throw std::invalid_argument("covering_length: signal support too long to truncate");
                last = power_law_index_map(spec.q, static_cast<std::size_t>(lJ)).back();
            }
            break;
        }
        case SignalMode::sparse:
            if (std::abs(spec.magnitude) >= threshold)
                for (std::size_t idx : spec.support) last = std::max(last, idx);
            break;
        case SignalMode::explicit_values:
            for (std::size_t i = 0; i < spec.values.size(); ++i)
                if (std::abs(spec.values[i]) >= threshold) last = i + 1;
            break;
    }
    return std::max(last, floor);
}

std::uint64_t instance_key(std::uint64_t seed, std::uint64_t rep) { return derive_key(seed, rep); }

std::vector<double> add_noise(std::span<const double> theta_star, double epsilon, std::uint64_t key) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("noise: epsilon must be non-negative");
    const CounterRng rng(key);
    std::vector<double> z(theta_star.begin(), theta_star.end());
    if (epsilon == 0.0) return z;
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += epsilon * rng.gaussian(j);
    return z;
}

SequenceInstance sample_instance(const SignalSpec& spec, const EigenSchedule& schedule, double epsilon,
                                 std::uint64_t seed) {
    schedule.validate();
    SequenceInstance inst;
    inst.epsilon = epsilon;
    inst.seed = seed;
    inst.theta_star = build_signal(spec, schedule.N);
    inst.z = add_noise(inst.theta_star, epsilon, seed);
    return inst;
}

StructureReport structure_report(std::span<const double> theta_star, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("structure_report: delta must be positive");
    StructureReport r;
    std::vector<double> small;
    for (std::size_t j = 0; j < theta_star.size(); ++j) {
        const double v = theta_star[j];
        if (std::abs(v) >= delta) {
            r.jsig.push_back(j + 1);
        } else {
            small.push_back(v * v);
        }
    }
    r.phi_of_delta = static_cast<double>(r.jsig.size());
    r.psi_of_delta = pairwise_sum(small);
    r.max_jsig = r.jsig.empty() ? 0 : r.jsig.back();
    r.kappa_hat = (delta < 1.0 && r.max_jsig > 0)
                      ? std::log(static_cast<double>(r.max_jsig)) / std::log(1.0 / delta)
                      : std::numeric_limits<double>::quiet_NaN();
    return r;
}

PhiPsiExponents phi_psi_rate_check(const SignalSpec& spec, std::span<const double> delta_grid) {
    if (spec.mode != SignalMode::power_law)
        throw std::invalid_argument("phi_psi_rate_check: power-law signals only");
    if (delta_grid.size() < 3) throw std::invalid_argument("phi_psi_rate_check: need at least 3 grid points");
    const auto [lo, hi] = std::minmax_element(delta_grid.begin(), delta_grid.end());
    if (!(*lo > 0.0)) throw std::invalid_argument("phi_psi_rate_check: deltas must be positive");
    if (*hi / *lo < 100.0) throw std::invalid_argument("phi_psi_rate_check: grid must span two decades");

    const std::size_t N = covering_length(spec, *lo, 16);
    const auto theta = build_signal(spec, N);
    const double tail = signal_tail_energy(spec, N);

    std::vector<double> log_delta, log_phi, log_psi;
    for (double d : delta_grid) {
        const auto rep = structure_report(theta, d);
        if (!(rep.phi_of_delta > 0.0))
            throw std::invalid_argument("phi_psi_rate_check: delta above the largest signal component");
        log_delta.push_back(std::log(d));
        log_phi.push_back(std::log(rep.phi_of_delta));
        log_psi.push_back(std::log(rep.psi_of_delta + tail));
    }
    return {ols_fit(log_delta, log_phi).slope, ols_fit(log_delta, log_psi).slope};
}

}  // namespace seqflow
