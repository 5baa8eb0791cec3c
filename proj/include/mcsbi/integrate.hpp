#pragma once

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/gaussian.hpp"
#include "mcsbi/moments.hpp"

namespace mcsbi {

/// Mean vector and covariance matrix of the Gaussian process approximation
/// at one instant.
struct MomentState {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    double time = 0.0;

    Eigen::VectorXd packed(const MomentField& field) const {
        const int n = field.species_count();
        Eigen::VectorXd y(field.packed_size());
        y.head(n) = mu;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) y[n + field.tri_index(i, j)] = sigma(i, j);
        return y;
    }

    static MomentState unpacked(const MomentField& field, const Eigen::VectorXd& y, double time) {
        const int n = field.species_count();
        MomentState s;
        s.time = time;
        s.mu = y.head(n);
        s.sigma.resize(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) s.sigma(i, j) = s.sigma(j, i) = y[n + field.tri_index(i, j)];
        return s;
    }
};

/// Numeric right-hand side of the closed moment ODEs. dSigma/dt is exactly
/// symmetric because only the upper triangle is represented.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> ode_rhs(const MomentField& field,
                                                           const MomentState& state) {
    if (state.mu.size() != field.species_count())
        throw NumericError("moment state dimension does not match the field");
    Eigen::VectorXd y = state.packed(field);
    Eigen::VectorXd dy;
    field.evaluate(y, dy);
    if (!dy.allFinite()) {
        std::ostringstream os;
        os << "moment ODE right-hand side is not finite at t = " << state.time;
        throw NumericError(os.str());
    }
    MomentState d = MomentState::unpacked(field, dy, state.time);
    return {d.mu, d.sigma};
}

struct IntegrateOptions {
    double rtol = 1e-6;
    double atol = 1e-8;
    double psd_floor = 1e-10;
    long max_steps = 100000000;
};

/// Integrate the closed moment ODEs from state.time to t_target with an
/// embedded Dormand-Prince 5(4) pair and a PI step controller. The final
/// covariance is symmetrized and PSD-repaired. Deterministic for fixed
/// inputs and tolerances.
inline MomentState integrate(const MomentField& field, const MomentState& state, double t_target,
                             const IntegrateOptions& opt = {}) {
    if (t_target < state.time)
        throw NumericError("integration target precedes the current state time");
    if (t_target == state.time) return state;

    // Dormand-Prince coefficients
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                        e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    const double span = t_target - state.time;
    const double h_floor = 1e-12 * span;

    Eigen::VectorXd y = state.packed(field);
    double t = state.time;

    // Non-finite values inside a trial step reject the step (the controller
    // shrinks h); only a non-finite derivative at an accepted state is fatal.
    auto rhs = [&](const Eigen::VectorXd& yy, Eigen::VectorXd& out) -> bool {
        field.evaluate(yy, out);
        return out.allFinite();
    };

    Eigen::VectorXd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()),
        k6(y.size()), k7(y.size()), ytmp(y.size()), ynew(y.size()), yerr(y.size());
    if (!rhs(y, k1)) {
        std::ostringstream os;
        os << "moment ODE right-hand side is not finite at t = " << t;
        throw NumericError(os.str());
    }

    // initial step heuristic
    double scale0 = k1.cwiseAbs().maxCoeff();
    double h = std::min(span, scale0 > 0.0 ? std::max(1e-6 * span, 0.01 / scale0) : 0.01 * span);
    double err_prev = 1.0;
    bool first_same_as_last = false;

    for (long step = 0; step < opt.max_steps; ++step) {
        if (t >= t_target) break;
        h = std::min(h, t_target - t);
        if (h < h_floor)
            throw StiffnessError(
                "step size underflow in the moment integrator (system too stiff for the "
                "explicit scheme; loosen tolerances or reduce the grid spacing)", t);

        if (first_same_as_last) k1.swap(k7);

        double err = kInf;
        ytmp = y + h * (a21 * k1);
        bool ok = rhs(ytmp, k2);
        if (ok) {
            ytmp = y + h * (a31 * k1 + a32 * k2);
            ok = rhs(ytmp, k3);
        }
        if (ok) {
            ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            ok = rhs(ytmp, k4);
        }
        if (ok) {
            ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            ok = rhs(ytmp, k5);
        }
        if (ok) {
            ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            ok = rhs(ytmp, k6);
        }
        if (ok) {
            ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            ok = rhs(ynew, k7);
        }
        if (ok) {
            yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            err = 0.0;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                double r = yerr[i] / sc;
                err += r * r;
            }
            err = std::sqrt(err / static_cast<double>(y.size()));
            if (!std::isfinite(err)) err = kInf;
        }

        if (err <= 1.0) {
            t += h;
            y.swap(ynew);
            first_same_as_last = true;
            if (t_target - t < h_floor) t = t_target; // absorb roundoff at the endpoint
            double grow = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                          std::pow(err_prev, 0.4 / 5.0);
            h *= std::clamp(grow, 0.2, 5.0);
            err_prev = std::max(err, 1e-10);
        } else {
            first_same_as_last = false;
            h *= err == kInf ? 0.1 : std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        }
        if (step + 1 == opt.max_steps)
            throw StiffnessError("moment integrator exceeded its step budget", t);
    }

    MomentState out = MomentState::unpacked(field, y, t_target);
    out.sigma = psd_repair(out.sigma, opt.psd_floor);
    return out;
}

} // namespace mcsbi
