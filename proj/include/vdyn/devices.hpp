#pragma once

// One-axis synchronous generator with a first-order exciter, and the
// grid-forming converter with reactive/voltage loops around a virtual
// internal voltage. Injections are conjugate complex powers g_i such that
// the network equation reads Y*V = g(x, conj(V)) / conj(V).
//
// State layout per device is [delta, omega, e, efd] where e is E'_q (SG)
// or E_vir (GFM), and efd is E_fd or E_vir_fd. All state-derivative
// partials below are of the normalized derivatives (time constants
// divided out).

#include <cmath>

#include "vdyn/common.hpp"

namespace vdyn {

struct SgParams {
    double x_d = 1.8;
    double x_q = 1.7;
    double x_dp = 0.3;   // transient d-axis reactance x'_d
    double t_d0p = 8.0;  // T'_d0, s
    double k_a = 50.0;   // exciter gain
    double t_a = 0.05;   // exciter time constant, s
    double v_ref = 1.0;
    double h = 6.0;      // inertia, s (swing plumbing)
    double d = 2.0;      // damping (swing plumbing)
    double p_m = 0.0;    // mechanical power input, set at initialization
};

struct SgState {
    double delta = 0;  // q-axis angle vs. network reference, rad
    double omega = 0;  // p.u. speed deviation
    double e_qp = 1;   // E'_q
    double e_fd = 0;   // E_fd
};

struct GfmParams {
    double x_l = 0.1;    // converter coupling reactance
    double k_i = 0.1;    // integral constant of the E_vir loop, s
    double k_d = 5.0;    // angle-loop damping gain
    double t_w = 0.02;   // voltage-loop time constant, s
    double k_u = 1.0;    // voltage gain
    double k_q = 0.1;    // reactive gain
    double v_ref = 1.0;
    double q_ref = 0.0;
    double h_vir = 5.0;  // virtual inertia, s
    double d_vir = 0.0;  // extra virtual damping
    double p_ref = 0.0;  // active power reference, set at initialization
};

struct GfmState {
    double delta = 0;
    double omega = 0;
    double e_vir = 1;
    double e_vir_fd = 0;
};

/// All analytic blocks for one device. dF_dVbar = conj(dF_dV) holds exactly
/// because the state derivatives are real functions of (V, conj(V)).
struct DevicePartials {
    // injection partials, own bus
    Complex dg_dV{};
    Complex dg_dVbar{};
    Complex dg_ddelta{};
    Complex dg_de{};
    // normalized state-derivative partials w.r.t. own-bus voltage,
    // rows [delta, omega, e, efd]
    Eigen::Vector4cd dF_dV = Eigen::Vector4cd::Zero();
    Eigen::Vector4cd dF_dVbar = Eigen::Vector4cd::Zero();
    // direct partials w.r.t. own states [delta, omega, e, efd]
    Eigen::Matrix4d dF_dx = Eigen::Matrix4d::Zero();
};

namespace detail {
inline void require_voltage(Complex v, int bus = -1) {
    if (std::abs(v) < 1e-8) throw LowVoltageRegime(bus);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Synchronous generator
// ---------------------------------------------------------------------------

/// Conjugate-power injection of the salient-pole (two-reaction) machine.
inline Complex sg_injection(const SgParams& p, const SgState& s, Complex V) {
    detail::require_voltage(V);
    const Complex Vb = std::conj(V);
    const Complex ejd = std::polar(1.0, s.delta);
    const double a = 0.5 * (1.0 / p.x_q + 1.0 / p.x_dp);
    const double b = 0.5 * (1.0 / p.x_dp - 1.0 / p.x_q);
    return kImag * a * std::norm(V) + kImag * b * Vb * Vb * ejd * ejd -
           kImag * s.e_qp * Vb * ejd / p.x_dp;
}

inline double sg_electrical_power(const SgParams& p, const SgState& s, Complex V) {
    return sg_injection(p, s, V).real();
}

/// Normalized state derivatives [d_delta, d_omega, d_e_qp, d_e_fd].
inline Eigen::Vector4d sg_derivative(const SgParams& p, const SgState& s, Complex V,
                                     double omega_s) {
    detail::require_voltage(V);
    const double vq = (V * std::polar(1.0, -s.delta)).real();
    const double pe = sg_electrical_power(p, s, V);
    const double ratio = p.x_d / p.x_dp;
    Eigen::Vector4d dx;
    dx(0) = omega_s * s.omega;
    dx(1) = (p.p_m - pe - p.d * s.omega) / (2.0 * p.h);
    dx(2) = (s.e_fd - ratio * s.e_qp + (ratio - 1.0) * vq) / p.t_d0p;
    dx(3) = (p.k_a * (p.v_ref - std::abs(V)) - s.e_fd) / p.t_a;
    return dx;
}

inline DevicePartials sg_partials(const SgParams& p, const SgState& s, Complex V,
                                  double omega_s) {
    detail::require_voltage(V);
    const Complex Vb = std::conj(V);
    const Complex ejd = std::polar(1.0, s.delta);
    const Complex emjd = std::conj(ejd);
    const double vmag = std::abs(V);
    const double a = 0.5 * (1.0 / p.x_q + 1.0 / p.x_dp);
    const double b = 0.5 * (1.0 / p.x_dp - 1.0 / p.x_q);
    const double ratio = p.x_d / p.x_dp;

    DevicePartials dp;
    dp.dg_dV = kImag * a * Vb;
    dp.dg_dVbar = kImag * a * V + 2.0 * kImag * b * Vb * ejd * ejd -
                  kImag * s.e_qp * ejd / p.x_dp;
    dp.dg_ddelta = -2.0 * b * Vb * Vb * ejd * ejd + s.e_qp * Vb * ejd / p.x_dp;
    dp.dg_de = -kImag * Vb * ejd / p.x_dp;

    // P_e = Re(g): dP_e/dV = (dg/dV + conj(dg/dVbar))/2
    const Complex dpe_dV = 0.5 * (dp.dg_dV + std::conj(dp.dg_dVbar));
    dp.dF_dV(1) = -dpe_dV / (2.0 * p.h);
    dp.dF_dV(2) = (ratio - 1.0) * 0.5 * emjd / p.t_d0p;          // via V_q
    dp.dF_dV(3) = -p.k_a * Vb / (2.0 * p.t_a * vmag);            // via |V|
    dp.dF_dVbar = dp.dF_dV.conjugate();

    const double vd = (V * emjd).imag();  // dV_q/d_delta
    dp.dF_dx(0, 1) = omega_s;
    dp.dF_dx(1, 0) = -dp.dg_ddelta.real() / (2.0 * p.h);
    dp.dF_dx(1, 1) = -p.d / (2.0 * p.h);
    dp.dF_dx(1, 2) = -dp.dg_de.real() / (2.0 * p.h);
    dp.dF_dx(2, 0) = (ratio - 1.0) * vd / p.t_d0p;
    dp.dF_dx(2, 2) = -ratio / p.t_d0p;
    dp.dF_dx(2, 3) = 1.0 / p.t_d0p;
    dp.dF_dx(3, 3) = -1.0 / p.t_a;
    return dp;
}

/// Quasi-steady exciter manifold E_fd = K_A (V_ref - |V|).
inline double quasi_steady_exciter(const SgParams& p, Complex V) {
    detail::require_voltage(V);
    return p.k_a * (p.v_ref - std::abs(V));
}

// ---------------------------------------------------------------------------
// Grid-forming converter
// ---------------------------------------------------------------------------

/// g = conj(V) * (E_vir e^{j delta} - V) / (j x_l)
inline Complex gfm_injection(const GfmParams& p, const GfmState& s, Complex V) {
    detail::require_voltage(V);
    const Complex Vb = std::conj(V);
    const Complex ejd = std::polar(1.0, s.delta);
    return Vb * (s.e_vir * ejd - V) / (kImag * p.x_l);
}

inline double gfm_electrical_power(const GfmParams& p, const GfmState& s, Complex V) {
    return gfm_injection(p, s, V).real();
}

/// Reactive power delivered to the network (measured algebraically).
inline double gfm_reactive_power(const GfmParams& p, const GfmState& s, Complex V) {
    return -gfm_injection(p, s, V).imag();
}

inline Eigen::Vector4d gfm_derivative(const GfmParams& p, const GfmState& s, Complex V,
                                      double q_c, double omega_s) {
    detail::require_voltage(V);
    const double pe = gfm_electrical_power(p, s, V);
    Eigen::Vector4d dx;
    dx(0) = omega_s * s.omega;
    dx(1) = (p.p_ref - pe - (p.k_d + p.d_vir) * s.omega) / (2.0 * p.h_vir);
    dx(2) = (p.k_q * (p.q_ref - q_c) + s.e_vir_fd) / p.k_i;
    dx(3) = (p.k_u * (p.v_ref - std::abs(V)) - s.e_vir_fd) / p.t_w;
    return dx;
}

inline DevicePartials gfm_partials(const GfmParams& p, const GfmState& s, Complex V,
                                   double omega_s) {
    detail::require_voltage(V);
    const Complex Vb = std::conj(V);
    const Complex ejd = std::polar(1.0, s.delta);
    const double vmag = std::abs(V);

    DevicePartials dp;
    dp.dg_dV = kImag * Vb / p.x_l;
    dp.dg_dVbar = -kImag * s.e_vir * ejd / p.x_l + kImag * V / p.x_l;
    dp.dg_ddelta = s.e_vir * Vb * ejd / p.x_l;
    dp.dg_de = -kImag * Vb * ejd / p.x_l;

    const Complex dpe_dV = 0.5 * (dp.dg_dV + std::conj(dp.dg_dVbar));
    // Q_c = -Im(g): dQ_c/dV = -(dg/dV - conj(dg/dVbar)) / (2j)
    const Complex dqc_dV = -(dp.dg_dV - std::conj(dp.dg_dVbar)) / (2.0 * kImag);

    dp.dF_dV(1) = -dpe_dV / (2.0 * p.h_vir);
    dp.dF_dV(2) = -(p.k_q / p.k_i) * dqc_dV;
    dp.dF_dV(3) = -p.k_u * Vb / (2.0 * p.t_w * vmag);
    dp.dF_dVbar = dp.dF_dV.conjugate();

    dp.dF_dx(0, 1) = omega_s;
    dp.dF_dx(1, 0) = -dp.dg_ddelta.real() / (2.0 * p.h_vir);
    dp.dF_dx(1, 1) = -(p.k_d + p.d_vir) / (2.0 * p.h_vir);
    dp.dF_dx(1, 2) = -dp.dg_de.real() / (2.0 * p.h_vir);
    // dQ_c/d(real parameter) = -Im(dg/d.)
    dp.dF_dx(2, 0) = (p.k_q / p.k_i) * dp.dg_ddelta.imag();
    dp.dF_dx(2, 2) = (p.k_q / p.k_i) * dp.dg_de.imag();
    dp.dF_dx(2, 3) = 1.0 / p.k_i;
    dp.dF_dx(3, 3) = -1.0 / p.t_w;
    return dp;
}

/// Quasi-steady voltage-loop manifold E_vir_fd = K_u (V_ref - |V|).
inline double quasi_steady_voltage_loop(const GfmParams& p, Complex V) {
    detail::require_voltage(V);
    return p.k_u * (p.v_ref - std::abs(V));
}

}  // namespace vdyn
