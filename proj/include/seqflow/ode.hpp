#ifndef SEQFLOW_ODE_HPP
#define SEQFLOW_ODE_HPP

// Adaptive Dormand-Prince 5(4) for scalar autonomous ODEs y' = f(y), with the
// 4th-order continuous extension for output at arbitrary times.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "seqflow/error.hpp"

namespace seqflow {

struct AdaptiveOptions {
    double rtol = 1e-10;
    double atol = 1e-14;
    std::size_t max_steps = 50'000'000;
};

template <class Rhs>
class Dopri5 {
public:
    Dopri5(Rhs rhs, double y0, const AdaptiveOptions& opts, double t0 = 0.0)
        : f_(rhs), opts_(opts), t_(t0), y_(y0), t_prev_(t0) {
        k1_ = f_(y_);
        h_ = initial_step();
    }

    double t() const { return t_; }
    double y() const { return y_; }

    // Takes one accepted step, never beyond t_limit. Returns false when t_limit was already reached.
    bool step(double t_limit) {
        if (t_ >= t_limit) return false;
        for (;;) {
            if (++steps_ > opts_.max_steps) throw NumericalAbort("adaptive integrator: step budget exhausted");
            double h = std::min(h_, t_limit - t_);
            const bool last = (h == t_limit - t_);
            const double k2 = f_(y_ + h * (a21 * k1_));
            const double k3 = f_(y_ + h * (a31 * k1_ + a32 * k2));
            const double k4 = f_(y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
            const double k5 = f_(y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
            const double k6 = f_(y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const double y_new = y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            const double k7 = f_(y_new);
            const double err_raw = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double scale = opts_.atol + opts_.rtol * std::max(std::abs(y_), std::abs(y_new));
            const double err = std::abs(err_raw) / scale;
            if (!std::isfinite(y_new) || !std::isfinite(err)) {
                // trial left the domain of f; retry with a much shorter step
                if (!(h > 1e-14 * std::max(1.0, std::abs(t_))))
                    throw NumericalAbort("adaptive integrator: non-finite state");
                h_ = 0.1 * h;
                continue;
            }
            const double factor =
                err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (err <= 1.0) {
                // continuous extension coefficients
                r1_ = y_;
                r2_ = y_new - y_;
                r3_ = h * k1_ - r2_;
                r4_ = r2_ - h * k7 - r3_;
                r5_ = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                t_prev_ = t_;
                h_prev_ = h;
                t_ = last ? t_limit : t_ + h;
                y_ = y_new;
                k1_ = k7;
                h_ = h * factor;
                return true;
            }
            h_ = h * std::max(factor, 0.2);
        }
    }

    // Dense value inside the last accepted step [t_prev, t].
    double dense(double t) const {
        const double s = (t - t_prev_) / h_prev_;
        const double s1 = 1.0 - s;
        return r1_ + s * (r2_ + s1 * (r3_ + s * (r4_ + s1 * r5_)));
    }

    double step_start() const { return t_prev_; }
    std::size_t attempts() const { return steps_; }

private:
    double initial_step() {
        const double sc = opts_.atol + opts_.rtol * std::abs(y_);
        const double d0 = std::abs(y_) / sc;
        const double d1n = std::abs(k1_) / sc;
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        const double k = f_(y_ + h0 * k1_);
        const double d2 = std::abs(k - k1_) / sc / h0;
        const double dm = std::max(d1n, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        return std::min(100.0 * h0, h1);
    }

    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                            a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    Rhs f_;
    AdaptiveOptions opts_;
    double t_ = 0.0;
    double y_;
    double k1_;
    double h_;
    std::size_t steps_ = 0;
    double t_prev_ = 0.0, h_prev_ = 1.0;
    double r1_ = 0.0, r2_ = 0.0, r3_ = 0.0, r4_ = 0.0, r5_ = 0.0;
};

}  // namespace seqflow

#endif  // SEQFLOW_ODE_HPP
