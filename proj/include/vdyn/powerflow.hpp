#pragma once

// Newton-Raphson power flow in polar coordinates, used only to initialize
// equilibria. Device buses are PV, the slack bus holds angle zero, all
// other buses are PQ.

#include <vector>

#include <Eigen/LU>

#include "vdyn/system.hpp"

namespace vdyn {

struct PowerFlowResult {
    VecC V;
    VecC S;  // complex net injection per bus at the solution
    int iterations = 0;
};

inline PowerFlowResult solve_power_flow(const PowerSystem& sys, double tol = 1e-10,
                                        int max_iter = 50) {
    const int n = sys.n_bus();
    const int slack = sys.net.slack;
    if (slack < 0) throw ValidationError("slack", "power flow requires a slack bus");

    std::vector<bool> is_pv(n, false);
    VecR pspec = VecR::Zero(n), qspec = VecR::Zero(n);
    VecR vm = VecR::Ones(n), va = VecR::Zero(n);
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        is_pv[b] = true;
        std::visit([&](const auto& u) {
            pspec(b) += u.pf_p;
            vm(b) = u.pf_vset;
        }, sys.devices[d]);
    }
    for (const auto& ld : sys.loads) {
        pspec(ld.bus) -= ld.p;
        qspec(ld.bus) -= ld.q;
    }

    std::vector<int> ang_idx, mag_idx;  // unknown columns
    for (int i = 0; i < n; ++i) {
        if (i != slack) ang_idx.push_back(i);
        if (!is_pv[i] && i != slack) mag_idx.push_back(i);
    }
    const int na = static_cast<int>(ang_idx.size());
    const int nm = static_cast<int>(mag_idx.size());

    const MatR G = sys.net.Y.real(), B = sys.net.Y.imag();

    auto injections_at = [&](VecR& P, VecR& Q) {
        VecC V(n);
        for (int i = 0; i < n; ++i) V(i) = std::polar(vm(i), va(i));
        const VecC S = V.cwiseProduct((sys.net.Y * V).conjugate());
        P = S.real();
        Q = S.imag();
        return V;
    };

    VecR P(n), Q(n);
    for (int it = 0; it <= max_iter; ++it) {
        const VecC V = injections_at(P, Q);
        VecR mis(na + nm);
        for (int k = 0; k < na; ++k) mis(k) = P(ang_idx[k]) - pspec(ang_idx[k]);
        for (int k = 0; k < nm; ++k) mis(na + k) = Q(mag_idx[k]) - qspec(mag_idx[k]);
        const double err = mis.size() ? mis.cwiseAbs().maxCoeff() : 0.0;
        if (err <= tol) {
            PowerFlowResult r;
            r.V = V;
            r.S = V.cwiseProduct((sys.net.Y * V).conjugate());
            r.iterations = it;
            return r;
        }
        if (it == max_iter)
            throw PowerFlowDiverged("power flow did not converge (mismatch " +
                                    std::to_string(err) + ")");

        MatR J = MatR::Zero(na + nm, na + nm);
        auto dP_dth = [&](int i, int j) {
            if (i == j) return -Q(i) - B(i, i) * vm(i) * vm(i);
            const double th = va(i) - va(j);
            return vm(i) * vm(j) * (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
        };
        auto dP_dvm = [&](int i, int j) {
            if (i == j) return P(i) / vm(i) + G(i, i) * vm(i);
            const double th = va(i) - va(j);
            return vm(i) * (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
        };
        auto dQ_dth = [&](int i, int j) {
            if (i == j) return P(i) - G(i, i) * vm(i) * vm(i);
            const double th = va(i) - va(j);
            return -vm(i) * vm(j) * (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
        };
        auto dQ_dvm = [&](int i, int j) {
            if (i == j) return Q(i) / vm(i) - B(i, i) * vm(i);
            const double th = va(i) - va(j);
            return vm(i) * (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
        };
        for (int r = 0; r < na; ++r) {
            for (int c = 0; c < na; ++c) J(r, c) = dP_dth(ang_idx[r], ang_idx[c]);
            for (int c = 0; c < nm; ++c) J(r, na + c) = dP_dvm(ang_idx[r], mag_idx[c]);
        }
        for (int r = 0; r < nm; ++r) {
            for (int c = 0; c < na; ++c) J(na + r, c) = dQ_dth(mag_idx[r], ang_idx[c]);
            for (int c = 0; c < nm; ++c)
                J(na + r, na + c) = dQ_dvm(mag_idx[r], mag_idx[c]);
        }

        const VecR du = Eigen::PartialPivLU<MatR>(J).solve(mis);
        if (!du.allFinite()) throw PowerFlowDiverged("singular power-flow Jacobian");
        for (int k = 0; k < na; ++k) va(ang_idx[k]) -= du(k);
        for (int k = 0; k < nm; ++k) vm(mag_idx[k]) -= du(na + k);
    }
    throw PowerFlowDiverged("unreachable");
}

}  // namespace vdyn
