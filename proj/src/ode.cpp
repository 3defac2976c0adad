#include "bvlab/ode.hpp"

#include <algorithm>
#include <cmath>

namespace bvlab {

namespace {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Dense {
    Vector r1, r2, r3, r4, r5;
    double t0 = 0.0;
    double h = 0.0;

    void eval(double t, Vector& y, Vector& dy) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        for (std::size_t i = 0; i < r1.size(); ++i) {
            const double q = r4[i] + th1 * r5[i];
            const double s = r3[i] + th * q;
            const double tt = r2[i] + th1 * s;
            y[i] = r1[i] + th * tt;
            const double dq = -r5[i];
            const double ds = q + th * dq;
            const double dt = -s + th1 * ds;
            dy[i] = (tt + th * dt) / h;
        }
    }
};

}  // namespace

OdeStatus integrate_dopri5(const OdeRhs& f, double t0, Vector y0, double t1, std::span<const double> outputs,
                           const OdeOptions& opts, const OdeOutput& on_output, const OdeStepHook& on_step) {
    const std::size_t n = y0.size();
    OdeStatus st;
    st.t = t0;
    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
    Vector yo(n), dyo(n);
    f(t0, y0, k1);

    std::size_t next_out = 0;
    auto emit_exact = [&](double t, const Vector& y, const Vector& dy) {
        while (next_out < outputs.size() && outputs[next_out] == t) {
            ++next_out;
            if (!on_output(t, y, dy)) return false;
        }
        return true;
    };
    if (!emit_exact(t0, y0, k1)) {
        st.stop = OdeStop::StoppedByCaller;
        st.y = y0;
        return st;
    }
    if (t1 <= t0) {
        st.y = y0;
        return st;
    }

    double h = opts.h_init;
    if (h <= 0.0) {
        double sk = 0.0;
        double d0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = opts.atol + opts.rtol * std::abs(y0[i]);
            sk += (k1[i] / sc) * (k1[i] / sc);
            d0 += (y0[i] / sc) * (y0[i] / sc);
        }
        sk = std::sqrt(sk / static_cast<double>(n));
        d0 = std::sqrt(d0 / static_cast<double>(n));
        h = (sk > 1e-5 && d0 > 1e-5) ? 0.01 * d0 / sk : 1e-6;
    }
    h = std::min({h, opts.h_max, t1 - t0});

    Dense dense;
    dense.r1.resize(n);
    dense.r2.resize(n);
    dense.r3.resize(n);
    dense.r4.resize(n);
    dense.r5.resize(n);

    double t = t0;
    Vector y = std::move(y0);
    bool last_rejected = false;
    while (t < t1) {
        if (st.accepted + st.rejected >= opts.max_steps) {
            st.stop = OdeStop::MaxSteps;
            break;
        }
        if (h < opts.h_min) {
            st.stop = OdeStop::StepUnderflow;
            break;
        }
        if (t + h > t1 || t + 1.01 * h >= t1) h = t1 - t;

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        const double tnew = t + h;
        f(tnew, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        f(tnew, ynew, k7);

        double err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
            finite = finite && std::isfinite(ynew[i]);
        }
        err = finite ? std::sqrt(err / static_cast<double>(n)) : INFINITY;

        if (!(err <= 1.0)) {
            ++st.rejected;
            const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
            h *= last_rejected ? std::min(fac, 0.5) : fac;
            last_rejected = true;
            continue;
        }

        for (std::size_t i = 0; i < n; ++i) {
            const double ydiff = ynew[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            dense.r1[i] = y[i];
            dense.r2[i] = ydiff;
            dense.r3[i] = bspl;
            dense.r4[i] = ydiff - h * k7[i] - bspl;
            dense.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        dense.t0 = t;
        dense.h = h;

        ++st.accepted;
        bool keep_going = true;
        while (keep_going && next_out < outputs.size() && outputs[next_out] <= tnew) {
            const double to = outputs[next_out];
            if (to == tnew) {
                yo = ynew;
                dyo = k7;
            } else {
                dense.eval(to, yo, dyo);
            }
            ++next_out;
            keep_going = on_output(to, yo, dyo);
        }

        t = tnew;
        y.swap(ynew);
        k1.swap(k7);
        if (!keep_going || (on_step && !on_step(t, y))) {
            st.stop = OdeStop::StoppedByCaller;
            break;
        }

        const double fac = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
        h = std::min(h * (last_rejected ? std::min(fac, 1.0) : fac), opts.h_max);
        last_rejected = false;
    }
    st.t = t;
    st.y = std::move(y);
    return st;
}

}  // namespace bvlab
