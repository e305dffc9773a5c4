#include "seqflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>

#include "seqflow/error.hpp"

namespace seqflow {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x)) bad_value(key, v, "a real number");
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "a boolean");
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(v)) {
        const auto c1 = item.find(':');
        if (c1 == std::string::npos) {
            out.push_back(to_u64(key, item));
            continue;
        }
        const auto c2 = item.find(':', c1 + 1);
        const auto first = to_u64(key, trim(item.substr(0, c1)));
        const auto last = to_u64(key, trim(item.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1)));
        const auto step = c2 == std::string::npos ? 1 : to_u64(key, trim(item.substr(c2 + 1)));
        if (step == 0 || last < first) bad_value(key, item, "a range first:last:step");
        for (auto x = first; x <= last; x += step) out.push_back(x);
    }
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, double>) {
            out += fmt(xs[i]);
        } else if constexpr (std::is_same_v<T, std::string>) {
            out += xs[i];
        } else {
            out += std::to_string(xs[i]);
        }
    }
    return out;
}

struct Key {
    const char* name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define SF_REAL(field)                                                                       \
    Key {                                                                                    \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(#field, v); }, \
            [](const ExperimentConfig& c) { return fmt(c.field); }                           \
    }
#define SF_SIZE(field)                                                                                       \
    Key {                                                                                                    \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = static_cast<std::size_t>(to_u64(#field, v)); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.field); }                                \
    }
#define SF_INT(field)                                                                                    \
    Key {                                                                                                \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = static_cast<int>(to_int(#field, v)); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.field); }                            \
    }
#define SF_STR(field)                                                                   \
    Key {                                                                               \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = v; },         \
            [](const ExperimentConfig& c) { return c.field; }                           \
    }
#define SF_BOOL(field)                                                                          \
    Key {                                                                                       \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(#field, v); }, \
            [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }   \
    }
#define SF_SIZES(field)                                                                         \
    Key {                                                                                       \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = to_size_list(#field, v); }, \
            [](const ExperimentConfig& c) { return join(c.field); }                             \
    }
#define SF_REALS(field)                                                                           \
    Key {                                                                                         \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = to_double_list(#field, v); }, \
            [](const ExperimentConfig& c) { return join(c.field); }                               \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        SF_REAL(p),
        SF_REAL(q),
        SF_REAL(gamma),
        SF_INT(D),
        SF_SIZES(n_grid),
        SF_SIZE(reps),
        Key{"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
        Key{"estimators", [](ExperimentConfig& c, const std::string& v) { c.estimators = split_list(v); },
            [](const ExperimentConfig& c) { return join(c.estimators); }},
        SF_STR(output_dir),
        Key{"eta",
            [](ExperimentConfig& c, const std::string& v) {
                if (v.empty() || v == "auto") {
                    c.eta_override.reset();
                } else {
                    c.eta_override = to_double("eta", v);
                }
            },
            [](const ExperimentConfig& c) { return c.eta_override ? fmt(*c.eta_override) : std::string("auto"); }},
        SF_SIZE(N),
        SF_STR(signal),
        SF_SIZES(sparse_support),
        SF_SIZE(sparse_s),
        SF_REAL(sparse_magnitude),
        SF_STR(stopping),
        SF_REAL(fixed_t),
        SF_STR(solver),
        SF_REAL(horizon),
        SF_REAL(vanilla_horizon),
        SF_REAL(grid_ratio),
        SF_REAL(rtol),
        SF_BOOL(report_schedule),
        Key{"threads", [](ExperimentConfig& c, const std::string& v) { c.threads = static_cast<unsigned>(to_u64("threads", v)); },
            [](const ExperimentConfig& c) { return std::to_string(c.threads); }},
        SF_REALS(p_list),
        SF_REALS(q_list),
        SF_REALS(gamma_list),
        SF_SIZE(trace_n),
        SF_SIZE(window_lo),
        SF_SIZE(window_hi),
        SF_REAL(mark_constant),
        SF_INT(kernel_d),
        SF_SIZE(kernel_n),
        SF_REAL(kernel_sigma),
        SF_REAL(kernel_r),
        SF_SIZE(kernel_M),
        SF_SIZE(kernel_seeds),
        SF_REAL(kernel_freq),
        SF_SIZE(kernel_holdout_n),
        SF_REAL(kernel_t_fixed_max),
        SF_REAL(kernel_t_adaptive_max),
        SF_INT(kernel_D),
        SF_REAL(kernel_b0),
        SF_STR(kernel_solver),
        SF_SIZES(kernel_n_sweep),
        SF_SIZE(kernel_snapshot_top),
    };
    return table;
}

#undef SF_REAL
#undef SF_SIZE
#undef SF_INT
#undef SF_STR
#undef SF_BOOL
#undef SF_SIZES
#undef SF_REALS

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : keys()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set_config_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            set_config_value(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string to_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    return out;
}

SignalSpec signal_spec(const ExperimentConfig& cfg) {
    if (cfg.signal == "power_law") return SignalSpec::power_law(cfg.p, cfg.q);
    if (cfg.signal == "zero") return SignalSpec::explicit_values({});
    if (cfg.signal == "sparse") {
        std::vector<std::size_t> support = cfg.sparse_support;
        if (support.empty())
            for (std::size_t j = 1; j <= cfg.sparse_s; ++j) support.push_back(j);
        return SignalSpec::sparse(support, cfg.sparse_magnitude);
    }
    throw ConfigError("signal must be power_law, sparse or zero (got '" + cfg.signal + "')");
}

std::vector<Estimator> estimator_list(const ExperimentConfig& cfg) {
    std::vector<Estimator> out;
    for (const auto& name : cfg.estimators) {
        Estimator e;
        if (name == "op") {
            e = Estimator::op(cfg.D);
        } else {
            try {
                e = Estimator::parse(name);
            } catch (const std::invalid_argument& ex) {
                throw ConfigError(ex.what());
            }
        }
        if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    }
    return out;
}

MonteCarloOptions monte_carlo_options(const ExperimentConfig& cfg) {
    MonteCarloOptions o;
    if (cfg.stopping == "oracle") {
        o.stopping = StoppingRule::oracle;
    } else if (cfg.stopping == "schedule") {
        o.stopping = StoppingRule::schedule;
    } else if (cfg.stopping == "fixed") {
        o.stopping = StoppingRule::fixed_time;
    } else {
        throw ConfigError("stopping must be oracle, schedule or fixed (got '" + cfg.stopping + "')");
    }
    o.fixed_t = cfg.fixed_t;
    if (cfg.solver == "exact") {
        o.solver = FlowSolver::exact;
    } else if (cfg.solver == "euler") {
        o.solver = FlowSolver::euler;
    } else if (cfg.solver == "rk4") {
        o.solver = FlowSolver::rk4;
    } else {
        throw ConfigError("solver must be exact, euler or rk4 (got '" + cfg.solver + "')");
    }
    o.horizon = cfg.horizon;
    o.vanilla_horizon = cfg.vanilla_horizon;
    o.grid_ratio = cfg.grid_ratio;
    o.eta = cfg.eta_override;
    o.ode.rtol = cfg.rtol;
    o.threads = cfg.threads;
    return o;
}

void validate(const ExperimentConfig& cfg, const std::string& command) {
    const bool seq = command == "compare" || command == "table" || command == "eigtrace";
    if (seq) {
        require(cfg.D >= 0 && cfg.D <= 20, "D must be in 0..20");
        require(cfg.reps >= 1, "reps must be >= 1");
        require(cfg.grid_ratio > 1.0, "grid_ratio must exceed 1");
        require(cfg.horizon > 0.0 && cfg.vanilla_horizon > 0.0, "horizons must be positive");
        require(cfg.rtol > 0.0 && cfg.rtol < 1e-2, "rtol must be in (0, 1e-2)");
        require(!cfg.eta_override || *cfg.eta_override > 0.0, "eta must be positive");
        (void)monte_carlo_options(cfg);
        if (cfg.stopping == "fixed") require(cfg.fixed_t > 0.0, "stopping=fixed needs fixed_t > 0");
        const auto ests = estimator_list(cfg);
        require(!ests.empty(), "estimators is empty");
        if (cfg.stopping == "schedule" || cfg.report_schedule)
            for (const auto& e : ests)
                require(e.kind == EstimatorKind::op || cfg.signal == "power_law",
                        "schedule stopping for vanilla needs signal=power_law");
        auto check_cell = [&](double p, double q, double gamma) {
            require(gamma > 1.0, "gamma must exceed 1 (got " + fmt(gamma) + ")");
            if (cfg.signal == "power_law") {
                require(p > 0.0, "p must be positive (got " + fmt(p) + ")");
                require(q >= 1.0, "q must be >= 1 (got " + fmt(q) + ")");
            }
        };
        if (command == "table") {
            require(!cfg.p_list.empty() && !cfg.q_list.empty() && !cfg.gamma_list.empty(),
                    "p_list, q_list and gamma_list must be non-empty");
            for (double p : cfg.p_list)
                for (double q : cfg.q_list)
                    for (double g : cfg.gamma_list) check_cell(p, q, g);
        } else {
            check_cell(cfg.p, cfg.q, cfg.gamma);
        }
        try {
            signal_spec(cfg).validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (command == "eigtrace") {
            require(cfg.trace_n >= 2, "trace_n must be >= 2");
            require(cfg.window_lo >= 1 && cfg.window_lo <= cfg.window_hi, "window must satisfy 1 <= window_lo <= window_hi");
            require(cfg.N == 0 || cfg.window_hi <= cfg.N, "window_hi exceeds N");
        } else {
            require(command != "table" || cfg.n_grid.size() >= 3, "n_grid needs >= 3 points for a rate fit");
            require(!cfg.n_grid.empty(), "n_grid is empty");
            for (auto n : cfg.n_grid) require(n >= 2, "every n in n_grid must be >= 2");
        }
    } else if (command == "kernel2d") {
        require(cfg.kernel_d >= 1 && cfg.kernel_d <= 4, "kernel_d must be in 1..4");
        require(cfg.kernel_r > cfg.kernel_d / 2.0, "kernel_r must exceed kernel_d / 2");
        require(cfg.kernel_n >= 1, "kernel_n must be >= 1");
        require(cfg.kernel_sigma >= 0.0, "kernel_sigma must be >= 0");
        require(cfg.kernel_seeds >= 1, "kernel_seeds must be >= 1");
        require(cfg.kernel_t_fixed_max > 0.1 && cfg.kernel_t_adaptive_max > 0.1, "kernel time horizons must exceed 0.1");
        require(cfg.kernel_D >= 0 && cfg.kernel_D <= 10, "kernel_D must be in 0..10");
        require(cfg.kernel_b0 > 0.0, "kernel_b0 must be positive");
        require(cfg.kernel_solver == "exact" || cfg.kernel_solver == "gd", "kernel_solver must be exact or gd");
        require(cfg.grid_ratio > 1.0, "grid_ratio must exceed 1");
        for (auto n : cfg.kernel_n_sweep) require(n >= 1, "kernel_n_sweep entries must be >= 1");
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    require(!cfg.output_dir.empty(), "output_dir is empty");
}

}  // namespace seqflow
