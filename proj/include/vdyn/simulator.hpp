#pragma once

// Time-domain simulation: partitioned-explicit fixed-step RK4 on the device
// ODEs with the network algebraic constraint re-solved at every stage,
// event handling with exact step splitting, equilibrium initialization, the
// reduced-order (quasi-steady exciter) run, and the small linear demo system.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdyn/jacobian.hpp"
#include "vdyn/powerflow.hpp"
#include "vdyn/system.hpp"

namespace vdyn {

// ---------------------------------------------------------------------------
// Events and scenarios
// ---------------------------------------------------------------------------

struct Event {
    enum class Kind { fault_on, fault_off, vref_step, qref_step, load_shed };
    double time = 0;
    Kind kind = Kind::fault_on;
    int bus = -1;                     // fault/shed bus, or device bus for steps
    double dv = 0;                    // vref/qref step size, p.u.
    double dp = 0, dq = 0;            // load shed amounts, p.u.
    Complex y_fault{0.0, -1e4};       // fault shunt admittance
};

struct Scenario {
    std::string name;
    std::vector<Event> events;        // time-sorted
    double t_end = 5.0;
    double dt = 1e-3;
    int jacobian_stride = 10;         // samples between Jacobian snapshots; 0 = off
    std::vector<std::string> record;  // signal selection for serialization
};

struct TimeSeries {
    std::vector<double> times;
    MatR states;     // sample rows, full state layout
    MatC voltages;   // sample rows, complex bus voltages
    MatR vmag;
    MatR pe, qc;     // per-device outputs
    std::vector<double> snapshot_times;
    std::vector<JacobianReport> snapshots;
    bool failed = false;
    std::string fail_reason;

    int n_samples() const { return static_cast<int>(times.size()); }
};

// ---------------------------------------------------------------------------
// Equilibrium initialization
// ---------------------------------------------------------------------------

struct Equilibrium {
    PowerSystem sys;  // copy with v_ref / q_ref / p_m fixed to hold the point
    VecR x0;
    VecC V0;
};

/// Power flow, device back-solve, and the global slack-angle rotation that
/// keeps every internal angle within +-45 degrees of the reference.
inline Equilibrium init_equilibrium(const PowerSystem& sys_in) {
    Equilibrium eq;
    eq.sys = sys_in;
    PowerSystem& sys = eq.sys;

    const PowerFlowResult pf = solve_power_flow(sys);
    const int ndev = sys.n_dev();
    eq.x0 = VecR::Zero(sys.n_state());
    eq.V0 = pf.V;

    VecC s_load = VecC::Zero(sys.n_bus());
    for (const auto& ld : sys.loads) s_load(ld.bus) += Complex(ld.p, ld.q);

    for (int d = 0; d < ndev; ++d) {
        const int b = sys.device_bus(d);
        const Complex V = pf.V(b);
        const Complex s_dev = pf.S(b) + s_load(b);
        const Complex I = std::conj(s_dev / V);
        if (sys.is_gfm(d)) {
            auto& u = std::get<GfmUnit>(sys.devices[d]);
            const Complex E = V + kImag * u.p.x_l * I;
            eq.x0(sys.sidx(d, PowerSystem::kDelta)) = std::arg(E);
            eq.x0(sys.sidx(d, PowerSystem::kE)) = std::abs(E);
            eq.x0(sys.sidx(d, PowerSystem::kEfd)) = 0.0;
            u.p.v_ref = std::abs(V);
            u.p.q_ref = s_dev.imag();
            u.p.p_ref = s_dev.real();
        } else {
            auto& u = std::get<SgUnit>(sys.devices[d]);
            const Complex Eq_dir = V + kImag * u.p.x_q * I;  // lies on the q axis
            const double delta = std::arg(Eq_dir);
            const Complex rot = std::polar(1.0, -delta);
            const double vq = (V * rot).real();
            const double id = (I * rot).imag();
            const double e_qp = vq - u.p.x_dp * id;
            const double ratio = u.p.x_d / u.p.x_dp;
            const double e_fd = ratio * e_qp - (ratio - 1.0) * vq;
            eq.x0(sys.sidx(d, PowerSystem::kDelta)) = delta;
            eq.x0(sys.sidx(d, PowerSystem::kE)) = e_qp;
            eq.x0(sys.sidx(d, PowerSystem::kEfd)) = e_fd;
            u.p.v_ref = std::abs(V) + e_fd / u.p.k_a;
            u.p.p_m = s_dev.real();
        }
    }

    // slack-angle rotation: center the internal angles on zero
    if (ndev > 0) {
        double lo = 1e300, hi = -1e300;
        for (int d = 0; d < ndev; ++d) {
            const double del = eq.x0(sys.sidx(d, PowerSystem::kDelta));
            lo = std::min(lo, del);
            hi = std::max(hi, del);
        }
        const double shift = 0.5 * (lo + hi);
        for (int d = 0; d < ndev; ++d)
            eq.x0(sys.sidx(d, PowerSystem::kDelta)) -= shift;
        eq.V0 *= std::polar(1.0, -shift);
        for (int d = 0; d < ndev; ++d) {
            const double del = eq.x0(sys.sidx(d, PowerSystem::kDelta));
            if (std::abs(del) > M_PI / 4.0 + 1e-9)
                throw EquilibriumResidualTooLarge(
                    "internal angle exceeds 45 degrees after slack rotation");
        }
    }

    const double dnorm = sys.n_dev()
        ? dynamics(sys, eq.x0, eq.V0).cwiseAbs().maxCoeff() : 0.0;
    if (dnorm > 1e-8)
        throw EquilibriumResidualTooLarge("equilibrium derivative norm " +
                                          std::to_string(dnorm));
    return eq;
}

// ---------------------------------------------------------------------------
// Event application
// ---------------------------------------------------------------------------

/// Scenario-local mutable copy of the system plus active fault bookkeeping.
struct RunContext {
    PowerSystem sys;
    MatC Y0;  // pre-fault admittance matrix
    std::map<int, Complex> active_faults;

    explicit RunContext(const PowerSystem& s) : sys(s), Y0(s.net.Y) {}

    void rebuild_Y() {
        sys.net.Y = Y0;
        for (const auto& [bus, y] : active_faults) sys.net.Y(bus, bus) += y;
    }
};

inline void apply_event(RunContext& ctx, const Event& ev) {
    PowerSystem& sys = ctx.sys;
    switch (ev.kind) {
        case Event::Kind::fault_on:
            if (ev.bus < 0 || ev.bus >= sys.n_bus())
                throw ValidationError("event.bus", "unknown fault bus");
            ctx.active_faults[ev.bus] = ev.y_fault;
            ctx.rebuild_Y();
            break;
        case Event::Kind::fault_off:
            ctx.active_faults.erase(ev.bus);
            ctx.rebuild_Y();
            break;
        case Event::Kind::vref_step: {
            const int d = sys.device_at_bus(ev.bus);
            if (d < 0) throw ValidationError("event.bus", "no device at bus");
            std::visit([&](auto& u) { u.p.v_ref += ev.dv; }, sys.devices[d]);
            break;
        }
        case Event::Kind::qref_step: {
            const int d = sys.device_at_bus(ev.bus);
            if (d < 0 || !sys.is_gfm(d))
                throw ValidationError("event.bus", "qref step requires a GFM device");
            std::get<GfmUnit>(sys.devices[d]).p.q_ref += ev.dv;
            break;
        }
        case Event::Kind::load_shed: {
            for (auto& ld : sys.loads) {
                if (ld.bus == ev.bus) {
                    ld.p -= ev.dp;
                    ld.q -= ev.dq;
                    return;
                }
            }
            throw ValidationError("event.bus", "no load at bus");
        }
    }
}

// ---------------------------------------------------------------------------
// Time stepping
// ---------------------------------------------------------------------------

namespace detail {

/// One RK4 step of size h with the network re-solved at every stage.
inline void rk4_step(const PowerSystem& sys, double h, VecR& x, VecC& V,
                     bool reduced) {
    auto eval = [&](const VecR& xs, VecC& Vwork) -> VecR {
        if (reduced) {
            // injections ignore efd, so a placeholder expansion is enough
            VecR xf = VecR::Zero(sys.n_state());
            for (int d = 0; d < sys.n_dev(); ++d)
                xf.segment<3>(sys.sidx(d, 0)) = xs.segment<3>(3 * d);
            Vwork = solve_network(sys.net, make_injection_fn(sys, xf), Vwork);
            return reduced_dynamics(sys, xs, Vwork);
        }
        Vwork = solve_network(sys.net, make_injection_fn(sys, xs), Vwork);
        return dynamics(sys, xs, Vwork);
    };

    VecC Vw = V;
    const VecR k1 = eval(x, Vw);
    const VecR k2 = eval(x + 0.5 * h * k1, Vw);
    const VecR k3 = eval(x + 0.5 * h * k2, Vw);
    const VecR k4 = eval(x + h * k3, Vw);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // final solve at the advanced state for recording/warm start
    if (reduced) {
        VecR xf = VecR::Zero(sys.n_state());
        for (int d = 0; d < sys.n_dev(); ++d)
            xf.segment<3>(sys.sidx(d, 0)) = x.segment<3>(3 * d);
        V = solve_network(sys.net, make_injection_fn(sys, xf), Vw);
    } else {
        V = solve_network(sys.net, make_injection_fn(sys, x), Vw);
    }
}

inline TimeSeries run_impl(const PowerSystem& sys_in, const Scenario& sc,
                           const VecR& x0, const VecC& V0, bool reduced) {
    RunContext ctx(sys_in);
    std::vector<Event> events = sc.events;
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });

    const int n_steps = static_cast<int>(std::llround(sc.t_end / sc.dt));
    const int n_samples = n_steps + 1;
    TimeSeries ts;
    ts.times.reserve(n_samples);
    ts.states.resize(n_samples, sys_in.n_state());
    ts.voltages.resize(n_samples, sys_in.n_bus());
    ts.vmag.resize(n_samples, sys_in.n_bus());
    ts.pe.resize(n_samples, sys_in.n_dev());
    ts.qc.resize(n_samples, sys_in.n_dev());

    VecR x = x0;
    VecC V = V0;
    std::size_t next_event = 0;
    const double time_eps = 1e-9;

    auto full_state = [&](const VecR& xs) -> VecR {
        if (!reduced) return xs;
        return expand_state(ctx.sys, xs, V);
    };

    int recorded = 0;
    try {
        // settle V for the initial state with the (unmodified) scenario system
        V = solve_network(ctx.sys.net, make_injection_fn(ctx.sys, full_state(x)), V);
        for (int k = 0; k <= n_steps; ++k) {
            const double t = k * sc.dt;
            const VecR xf = full_state(x);
            ts.times.push_back(t);
            ts.states.row(recorded) = xf.transpose();
            ts.voltages.row(recorded) = V.transpose();
            ts.vmag.row(recorded) = V.cwiseAbs().transpose();
            VecR pe, qc;
            device_outputs(ctx.sys, xf, V, pe, qc);
            ts.pe.row(recorded) = pe.transpose();
            ts.qc.row(recorded) = qc.transpose();
            ++recorded;

            if (sc.jacobian_stride > 0 && k % sc.jacobian_stride == 0) {
                ts.snapshot_times.push_back(t);
                ts.snapshots.push_back(trajectory_jacobian(ctx.sys, xf, V, t));
            }

            if (k == n_steps) break;

            // integrate from t to t+dt, splitting at event times
            double tc = t;
            const double t_next = (k + 1) * sc.dt;
            while (tc < t_next - time_eps) {
                while (next_event < events.size() &&
                       events[next_event].time <= tc + time_eps) {
                    apply_event(ctx, events[next_event]);
                    ++next_event;
                    V = solve_network(ctx.sys.net,
                                      make_injection_fn(ctx.sys, full_state(x)), V);
                }
                double t_stop = t_next;
                if (next_event < events.size())
                    t_stop = std::min(t_stop, events[next_event].time);
                rk4_step(ctx.sys, t_stop - tc, x, V, reduced);
                tc = t_stop;
            }
            // events landing exactly on the sample grid fire after the
            // pre-event sample is recorded, at the top of the next interval
        }
    } catch (const VdynError& err) {
        ts.failed = true;
        ts.fail_reason = err.what();
        const int keep = recorded;
        ts.states.conservativeResize(keep, Eigen::NoChange);
        ts.voltages.conservativeResize(keep, Eigen::NoChange);
        ts.vmag.conservativeResize(keep, Eigen::NoChange);
        ts.pe.conservativeResize(keep, Eigen::NoChange);
        ts.qc.conservativeResize(keep, Eigen::NoChange);
    }
    return ts;
}

}  // namespace detail

inline TimeSeries run(const PowerSystem& sys, const Scenario& sc, const VecR& x0,
                      const VecC& V0) {
    return detail::run_impl(sys, sc, x0, V0, /*reduced=*/false);
}

/// Reduced-order run: integrates [delta, omega, e] per device with the
/// exciter state pinned to its quasi-steady manifold. Recorded states use
/// the full layout with efd filled from the manifold.
inline TimeSeries run_reduced(const PowerSystem& sys, const Scenario& sc,
                              const VecR& x0_full, const VecC& V0) {
    return detail::run_impl(sys, sc, reduce_state(sys, x0_full), V0,
                            /*reduced=*/true);
}

// ---------------------------------------------------------------------------
// Linear demo system
// ---------------------------------------------------------------------------

inline MatR linear_demo_A() {
    MatR A(3, 3);
    A << -1, 0, 2,
          1, -3, 0,
          0, 1, -4;
    return A;
}
inline VecR linear_demo_b() { return (VecR(3) << 4, 0, 1).finished(); }
inline VecR linear_demo_c() { return (VecR(3) << 0, 1, 2).finished(); }

struct LinearDemoSeries {
    std::vector<double> times;
    MatR states;  // sample rows
    VecR y;
};

/// x' = A x + b * scale * u(t), x(0) = 0, unit step input, y = c.x
inline LinearDemoSeries run_linear_demo(double input_scale, double t_end = 10.0,
                                        double dt = 1e-3) {
    const MatR A = linear_demo_A();
    const VecR b = linear_demo_b() * input_scale;
    const VecR c = linear_demo_c();
    const int n_steps = static_cast<int>(std::llround(t_end / dt));

    LinearDemoSeries out;
    out.states.resize(n_steps + 1, 3);
    out.y.resize(n_steps + 1);
    VecR x = VecR::Zero(3);
    for (int k = 0; k <= n_steps; ++k) {
        out.times.push_back(k * dt);
        out.states.row(k) = x.transpose();
        out.y(k) = c.dot(x);
        if (k == n_steps) break;
        const VecR k1 = A * x + b;
        const VecR k2 = A * (x + 0.5 * dt * k1) + b;
        const VecR k3 = A * (x + 0.5 * dt * k2) + b;
        const VecR k4 = A * (x + dt * k3) + b;
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

}  // namespace vdyn
