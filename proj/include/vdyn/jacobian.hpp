#pragma once

// The systematic derivative pipeline: assemble A, B, C from the network and
// device partials, solve for dV/dx (exactly via the Schur complement, or by
// the A^-1 C approximation), and compose the trajectory Jacobian and the
// reduced-order Jacobian.

#include <string>
#include <vector>

#include <Eigen/LU>

#include "vdyn/system.hpp"

namespace vdyn {

enum class SensitivityMethod { exact, approximate };

struct SensitivityBundle {
    MatC A;  // diag(conj(V))*Y - dg/dV
    MatC B;  // diag(Y*V) - dg/dVbar   (diag(S_bar/V_bar) = Y*V at a solution)
    MatC C;  // dg/dx, n x m
    VecC V;
    MatC dV_dx;  // n x m, filled by the sensitivity solves
    SensitivityMethod method = SensitivityMethod::exact;
};

/// Builds A, B, C at a solved operating point. Throws StaleVoltageProfile
/// if V does not solve the network equations to 1e-8.
inline SensitivityBundle assemble_abc(const PowerSystem& sys, const VecR& x,
                                      const VecC& V) {
    const int n = sys.n_bus();
    const int m = sys.n_state();

    const VecC g = injections(sys, x, V);
    const VecC YV = sys.net.Y * V;
    const double res = (V.conjugate().cwiseProduct(YV) - g).cwiseAbs().maxCoeff();
    if (res > 1e-8) throw StaleVoltageProfile(res);

    SensitivityBundle b;
    b.V = V;
    b.A = V.conjugate().asDiagonal() * sys.net.Y;
    b.B = MatC::Zero(n, n);
    b.B.diagonal() = YV;
    b.C = MatC::Zero(n, m);

    const auto parts = all_partials(sys, x, V);
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int bus = sys.device_bus(d);
        b.A(bus, bus) -= parts[d].dg_dV;
        b.B(bus, bus) -= parts[d].dg_dVbar;
        b.C(bus, sys.sidx(d, PowerSystem::kDelta)) = parts[d].dg_ddelta;
        b.C(bus, sys.sidx(d, PowerSystem::kE)) = parts[d].dg_de;
    }
    return b;
}

/// dV/dx = [A - B conj(A)^-1 conj(B)]^-1 [C - B conj(A)^-1 conj(C)]
inline const MatC& voltage_sensitivity_exact(SensitivityBundle& b) {
    Eigen::PartialPivLU<MatC> luA(b.A.conjugate());
    const MatC AinvB = luA.solve(b.B.conjugate());
    const MatC AinvC = luA.solve(b.C.conjugate());
    const MatC S = b.A - b.B * AinvB;
    Eigen::FullPivLU<MatC> luS(S);
    if (!luS.isInvertible()) throw SingularSchurComplement();
    b.dV_dx = luS.solve(b.C - b.B * AinvC);
    if (!b.dV_dx.allFinite()) throw SingularSchurComplement();
    b.method = SensitivityMethod::exact;
    return b.dV_dx;
}

/// Approximate sensitivity dV/dx ~ A^-1 C, valid when B conj(A)^-1 terms
/// are small.
inline const MatC& voltage_sensitivity_approx(SensitivityBundle& b) {
    Eigen::FullPivLU<MatC> luA(b.A);
    if (!luA.isInvertible()) throw SingularSchurComplement();
    b.dV_dx = luA.solve(b.C);
    b.method = SensitivityMethod::approximate;
    return b.dV_dx;
}

/// Entrywise d|V_i|/dx_j = Re(V_i * conj(dV_i/dx_j)) / |V_i|.
inline MatR voltage_magnitude_sensitivity(const MatC& dV_dx, const VecC& V) {
    const int n = static_cast<int>(dV_dx.rows());
    const int m = static_cast<int>(dV_dx.cols());
    MatR out(n, m);
    for (int i = 0; i < n; ++i) {
        const double vm = std::abs(V(i));
        if (vm <= 0) throw LowVoltageRegime(i);
        for (int j = 0; j < m; ++j)
            out(i, j) = (V(i) * std::conj(dV_dx(i, j))).real() / vm;
    }
    return out;
}

struct JacobianReport {
    MatR J_full;     // m x m trajectory Jacobian of the full state
    MatR J_reduced;  // p x p Jacobian over internal-voltage states
    MatR dVmag_dE;   // n x p sensitivity of |V| to internal voltages
    std::vector<std::string> state_labels;
    double t = 0;
};

namespace detail {

/// J = 2 Re(dF/dV * dV/dx) + dF/dx, using conj-pair collapse for real x.
inline MatR compose_full_jacobian(const PowerSystem& sys,
                                  const std::vector<DevicePartials>& parts,
                                  const MatC& dV_dx) {
    const int m = sys.n_state();
    MatR J = MatR::Zero(m, m);
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int bus = sys.device_bus(d);
        for (int c = 0; c < 4; ++c) {
            const int row = sys.sidx(d, c);
            for (int j = 0; j < m; ++j)
                J(row, j) += 2.0 * (parts[d].dF_dV(c) * dV_dx(bus, j)).real();
        }
        J.block<4, 4>(sys.sidx(d, 0), sys.sidx(d, 0)) += parts[d].dF_dx;
    }
    return J;
}

/// Fast/slow time-constant ratio T_fd / T_e per device (T_A/T'_d0 for SG,
/// T_w/K_i for GFM), the weight of the exciter row in the reduced Jacobian.
inline double manifold_weight(const PowerSystem& sys, int dev) {
    if (sys.is_gfm(dev)) {
        const auto& p = std::get<GfmUnit>(sys.devices[dev]).p;
        return p.t_w / p.k_i;
    }
    const auto& p = std::get<SgUnit>(sys.devices[dev]).p;
    return p.t_a / p.t_d0p;
}

}  // namespace detail

/// Full pipeline at a solved point: A,B,C -> dV/dx -> J_full, J_reduced,
/// d|V|/dE.
inline JacobianReport trajectory_jacobian(const PowerSystem& sys, const VecR& x,
                                          const VecC& V, double t = 0) {
    SensitivityBundle b = assemble_abc(sys, x, V);
    voltage_sensitivity_exact(b);
    const auto parts = all_partials(sys, x, V);

    JacobianReport rep;
    rep.t = t;
    rep.state_labels = sys.state_labels();
    rep.J_full = detail::compose_full_jacobian(sys, parts, b.dV_dx);

    const int p = sys.n_dev();
    MatC dV_dE(sys.n_bus(), p);
    for (int d = 0; d < p; ++d)
        dV_dE.col(d) = b.dV_dx.col(sys.sidx(d, PowerSystem::kE));
    rep.dVmag_dE = voltage_magnitude_sensitivity(dV_dE, V);

    // J_reduced(i,j) = J[e_i, e_j] + (T_fd,i / T_e,i) * J[efd_i, e_j]
    rep.J_reduced.resize(p, p);
    for (int i = 0; i < p; ++i) {
        const double w = detail::manifold_weight(sys, i);
        for (int j = 0; j < p; ++j) {
            const int ei = sys.sidx(i, PowerSystem::kE);
            const int ej = sys.sidx(j, PowerSystem::kE);
            const int fi = sys.sidx(i, PowerSystem::kEfd);
            rep.J_reduced(i, j) = rep.J_full(ei, ej) + w * rep.J_full(fi, ej);
        }
    }
    return rep;
}

/// Reduced-order Jacobian with the quasi-steady exciter manifold imposed
/// on the state before composition.
inline MatR reduced_jacobian(const PowerSystem& sys, const VecR& x, const VecC& V) {
    VecR xm = x;
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        if (sys.is_gfm(d))
            xm(sys.sidx(d, PowerSystem::kEfd)) =
                quasi_steady_voltage_loop(std::get<GfmUnit>(sys.devices[d]).p, V(b));
        else
            xm(sys.sidx(d, PowerSystem::kEfd)) =
                quasi_steady_exciter(std::get<SgUnit>(sys.devices[d]).p, V(b));
    }
    return trajectory_jacobian(sys, xm, V).J_reduced;
}

}  // namespace vdyn
