#pragma once

// PowerSystem = network + device list + constant-power loads, with the
// fixed state ordering [delta, omega, e, efd] per device, devices in bus
// order. Assembles the injection callback for the network solve and the
// per-device partials for the derivative pipeline.

#include <string>
#include <variant>
#include <vector>

#include "vdyn/devices.hpp"
#include "vdyn/network.hpp"

namespace vdyn {

struct SgUnit {
    int bus = 0;
    SgParams p;
    double pf_p = 0;     // power-flow dispatch, p.u.
    double pf_vset = 1;  // power-flow voltage setpoint
};

struct GfmUnit {
    int bus = 0;
    GfmParams p;
    double pf_p = 0;
    double pf_vset = 1;
};

using Device = std::variant<SgUnit, GfmUnit>;

struct ConstantPowerLoad {
    int bus = 0;
    double p = 0;  // p.u. consumption
    double q = 0;
};

struct PowerSystem {
    NetworkModel net;
    std::vector<Device> devices;
    std::vector<ConstantPowerLoad> loads;
    double omega_s = 2.0 * M_PI * 60.0;

    static constexpr int kDelta = 0;
    static constexpr int kOmega = 1;
    static constexpr int kE = 2;
    static constexpr int kEfd = 3;
    static constexpr int kStatesPerDevice = 4;

    int n_bus() const { return net.n(); }
    int n_dev() const { return static_cast<int>(devices.size()); }
    int n_state() const { return kStatesPerDevice * n_dev(); }
    int sidx(int dev, int comp) const { return kStatesPerDevice * dev + comp; }
    int device_bus(int dev) const {
        return std::visit([](const auto& u) { return u.bus; }, devices[dev]);
    }
    bool is_gfm(int dev) const { return std::holds_alternative<GfmUnit>(devices[dev]); }

    int device_at_bus(int bus) const {
        for (int d = 0; d < n_dev(); ++d)
            if (device_bus(d) == bus) return d;
        return -1;
    }

    std::vector<std::string> state_labels() const {
        static const char* comp[] = {"delta", "omega", "e", "efd"};
        std::vector<std::string> out;
        for (int d = 0; d < n_dev(); ++d) {
            const std::string tag =
                (is_gfm(d) ? "gfm" : "sg") + std::to_string(device_bus(d));
            for (int c = 0; c < 4; ++c) out.push_back(tag + ":" + comp[c]);
        }
        return out;
    }
};

namespace detail {
inline SgState sg_state_at(const VecR& x, const PowerSystem& sys, int dev) {
    return {x(sys.sidx(dev, 0)), x(sys.sidx(dev, 1)), x(sys.sidx(dev, 2)),
            x(sys.sidx(dev, 3))};
}
inline GfmState gfm_state_at(const VecR& x, const PowerSystem& sys, int dev) {
    return {x(sys.sidx(dev, 0)), x(sys.sidx(dev, 1)), x(sys.sidx(dev, 2)),
            x(sys.sidx(dev, 3))};
}
}  // namespace detail

/// Constant part of the injection vector: constant-power loads enter as
/// g_i = -conj(S_load). Constant-impedance loads live inside Y instead.
inline VecC load_injections(const PowerSystem& sys) {
    VecC g = VecC::Zero(sys.n_bus());
    for (const auto& ld : sys.loads) g(ld.bus) -= Complex(ld.p, -ld.q);
    return g;
}

/// Total conjugate-power injections for given states and voltages.
inline VecC injections(const PowerSystem& sys, const VecR& x, const VecC& V) {
    VecC g = load_injections(sys);
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        if (sys.is_gfm(d)) {
            const auto& u = std::get<GfmUnit>(sys.devices[d]);
            g(b) += gfm_injection(u.p, detail::gfm_state_at(x, sys, d), V(b));
        } else {
            const auto& u = std::get<SgUnit>(sys.devices[d]);
            g(b) += sg_injection(u.p, detail::sg_state_at(x, sys, d), V(b));
        }
    }
    return g;
}

/// Injection callback for solve_network, states held fixed.
inline InjectionFn make_injection_fn(const PowerSystem& sys, const VecR& x) {
    return [&sys, x](const VecC& V) {
        Injection inj;
        inj.g = load_injections(sys);
        inj.dg_dV = VecC::Zero(sys.n_bus());
        inj.dg_dVbar = VecC::Zero(sys.n_bus());
        for (int d = 0; d < sys.n_dev(); ++d) {
            const int b = sys.device_bus(d);
            if (sys.is_gfm(d)) {
                const auto& u = std::get<GfmUnit>(sys.devices[d]);
                const auto s = detail::gfm_state_at(x, sys, d);
                inj.g(b) += gfm_injection(u.p, s, V(b));
                const auto dp = gfm_partials(u.p, s, V(b), sys.omega_s);
                inj.dg_dV(b) += dp.dg_dV;
                inj.dg_dVbar(b) += dp.dg_dVbar;
            } else {
                const auto& u = std::get<SgUnit>(sys.devices[d]);
                const auto s = detail::sg_state_at(x, sys, d);
                inj.g(b) += sg_injection(u.p, s, V(b));
                const auto dp = sg_partials(u.p, s, V(b), sys.omega_s);
                inj.dg_dV(b) += dp.dg_dV;
                inj.dg_dVbar(b) += dp.dg_dVbar;
            }
        }
        return inj;
    };
}

/// Full state derivative vector at (x, V).
inline VecR dynamics(const PowerSystem& sys, const VecR& x, const VecC& V) {
    VecR dx(sys.n_state());
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        Eigen::Vector4d dd;
        if (sys.is_gfm(d)) {
            const auto& u = std::get<GfmUnit>(sys.devices[d]);
            const auto s = detail::gfm_state_at(x, sys, d);
            dd = gfm_derivative(u.p, s, V(b), gfm_reactive_power(u.p, s, V(b)),
                                sys.omega_s);
        } else {
            const auto& u = std::get<SgUnit>(sys.devices[d]);
            dd = sg_derivative(u.p, detail::sg_state_at(x, sys, d), V(b), sys.omega_s);
        }
        dx.segment<4>(sys.sidx(d, 0)) = dd;
    }
    return dx;
}

inline std::vector<DevicePartials> all_partials(const PowerSystem& sys, const VecR& x,
                                                const VecC& V) {
    std::vector<DevicePartials> out;
    out.reserve(sys.n_dev());
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        if (sys.is_gfm(d)) {
            const auto& u = std::get<GfmUnit>(sys.devices[d]);
            out.push_back(gfm_partials(u.p, detail::gfm_state_at(x, sys, d), V(b),
                                       sys.omega_s));
        } else {
            const auto& u = std::get<SgUnit>(sys.devices[d]);
            out.push_back(sg_partials(u.p, detail::sg_state_at(x, sys, d), V(b),
                                      sys.omega_s));
        }
    }
    return out;
}

/// Electrical power and reactive output per device.
inline void device_outputs(const PowerSystem& sys, const VecR& x, const VecC& V,
                           VecR& pe, VecR& qc) {
    pe.resize(sys.n_dev());
    qc.resize(sys.n_dev());
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        Complex g;
        if (sys.is_gfm(d)) {
            const auto& u = std::get<GfmUnit>(sys.devices[d]);
            g = gfm_injection(u.p, detail::gfm_state_at(x, sys, d), V(b));
        } else {
            const auto& u = std::get<SgUnit>(sys.devices[d]);
            g = sg_injection(u.p, detail::sg_state_at(x, sys, d), V(b));
        }
        pe(d) = g.real();
        qc(d) = -g.imag();
    }
}

/// Augmentation terms for Y_aug: 0.5j(1/x_q + 1/x'_d) at SG buses,
/// j/x_l at GFM buses.
inline VecC device_shunt_terms(const PowerSystem& sys) {
    VecC terms = VecC::Zero(sys.n_bus());
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        if (sys.is_gfm(d)) {
            const auto& u = std::get<GfmUnit>(sys.devices[d]);
            terms(b) += kImag / u.p.x_l;
        } else {
            const auto& u = std::get<SgUnit>(sys.devices[d]);
            terms(b) += 0.5 * kImag * (1.0 / u.p.x_q + 1.0 / u.p.x_dp);
        }
    }
    return terms;
}

// --- Reduced-order (Tikhonov) system: per-device states [delta, omega, e],
// exciter states replaced by their quasi-steady manifold values.

inline int reduced_n_state(const PowerSystem& sys) { return 3 * sys.n_dev(); }

inline VecR reduce_state(const PowerSystem& sys, const VecR& x) {
    VecR xr(reduced_n_state(sys));
    for (int d = 0; d < sys.n_dev(); ++d)
        xr.segment<3>(3 * d) = x.segment<3>(sys.sidx(d, 0));
    return xr;
}

/// Expand a reduced state to the full layout, filling efd from the manifold.
inline VecR expand_state(const PowerSystem& sys, const VecR& xr, const VecC& V) {
    VecR x(sys.n_state());
    for (int d = 0; d < sys.n_dev(); ++d) {
        x.segment<3>(sys.sidx(d, 0)) = xr.segment<3>(3 * d);
        const int b = sys.device_bus(d);
        if (sys.is_gfm(d))
            x(sys.sidx(d, PowerSystem::kEfd)) =
                quasi_steady_voltage_loop(std::get<GfmUnit>(sys.devices[d]).p, V(b));
        else
            x(sys.sidx(d, PowerSystem::kEfd)) =
                quasi_steady_exciter(std::get<SgUnit>(sys.devices[d]).p, V(b));
    }
    return x;
}

inline VecR reduced_dynamics(const PowerSystem& sys, const VecR& xr, const VecC& V) {
    const VecR x = expand_state(sys, xr, V);
    const VecR dx = dynamics(sys, x, V);
    VecR dxr(reduced_n_state(sys));
    for (int d = 0; d < sys.n_dev(); ++d)
        dxr.segment<3>(3 * d) = dx.segment<3>(sys.sidx(d, 0));
    return dxr;
}

}  // namespace vdyn
