#pragma once

// Test-side oracles, implemented independently of the library code paths
// they check: an entrywise admittance builder, a finite-difference power
// flow, central-difference Jacobians of the closed-loop maps, and a
// derivative-free 2-bus network solver.

#include <cmath>
#include <random>

#include "vdyn/vdyn.hpp"

namespace oracles {

using namespace vdyn;

// ---------------------------------------------------------------------------
// Independent admittance builder: computes each entry directly from the
// branch list instead of stamping.
// ---------------------------------------------------------------------------

inline MatC oracle_admittance(int n, const std::vector<Branch>& branches,
                              const VecC& shunts) {
    MatC Y(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            Complex acc = 0;
            for (const auto& br : branches) {
                const Complex y = 1.0 / Complex(br.r, br.x);
                if (i == j && (br.from == i || br.to == i))
                    acc += y + Complex(0.0, br.b_shunt / 2.0);
                if (i != j && ((br.from == i && br.to == j) ||
                               (br.from == j && br.to == i)))
                    acc -= y;
            }
            if (i == j && shunts.size() == n) acc += shunts(i);
            Y(i, j) = acc;
        }
    }
    return Y;
}

// ---------------------------------------------------------------------------
// Finite-difference power flow: same NR scheme but with a numerically
// differentiated mismatch Jacobian, sharing no Jacobian code with the
// library implementation.
// ---------------------------------------------------------------------------

inline VecC oracle_power_flow(const PowerSystem& sys, double tol = 1e-9,
                              int max_iter = 80) {
    const int n = sys.n_bus();
    const int slack = sys.net.slack;
    std::vector<bool> is_pv(n, false);
    VecR pspec = VecR::Zero(n), qspec = VecR::Zero(n);
    VecR vm = VecR::Ones(n), va = VecR::Zero(n);
    for (int d = 0; d < sys.n_dev(); ++d) {
        const int b = sys.device_bus(d);
        is_pv[b] = true;
        std::visit(
            [&](const auto& u) {
                pspec(b) += u.pf_p;
                vm(b) = u.pf_vset;
            },
            sys.devices[d]);
    }
    for (const auto& ld : sys.loads) {
        pspec(ld.bus) -= ld.p;
        qspec(ld.bus) -= ld.q;
    }
    std::vector<int> ai, mi;
    for (int i = 0; i < n; ++i) {
        if (i != slack) ai.push_back(i);
        if (!is_pv[i] && i != slack) mi.push_back(i);
    }
    const int na = (int)ai.size(), nm = (int)mi.size();

    auto mismatch = [&](const VecR& vau, const VecR& vmu) {
        VecC V(n);
        for (int i = 0; i < n; ++i) V(i) = std::polar(vmu(i), vau(i));
        const VecC S = V.cwiseProduct((sys.net.Y * V).conjugate());
        VecR mis(na + nm);
        for (int k = 0; k < na; ++k) mis(k) = S(ai[k]).real() - pspec(ai[k]);
        for (int k = 0; k < nm; ++k) mis(na + k) = S(mi[k]).imag() - qspec(mi[k]);
        return mis;
    };

    for (int it = 0; it < max_iter; ++it) {
        const VecR mis = mismatch(va, vm);
        if (mis.size() == 0 || mis.cwiseAbs().maxCoeff() <= tol) {
            VecC V(n);
            for (int i = 0; i < n; ++i) V(i) = std::polar(vm(i), va(i));
            return V;
        }
        const double h = 1e-7;
        MatR J(na + nm, na + nm);
        for (int c = 0; c < na + nm; ++c) {
            VecR vap = va, vam = va, vmp = vm, vmm = vm;
            if (c < na) {
                vap(ai[c]) += h;
                vam(ai[c]) -= h;
            } else {
                vmp(mi[c - na]) += h;
                vmm(mi[c - na]) -= h;
            }
            J.col(c) = (mismatch(vap, vmp) - mismatch(vam, vmm)) / (2.0 * h);
        }
        const VecR du = Eigen::PartialPivLU<MatR>(J).solve(mis);
        for (int k = 0; k < na; ++k) va(ai[k]) -= du(k);
        for (int k = 0; k < nm; ++k) vm(mi[k]) -= du(na + k);
    }
    throw std::runtime_error("oracle power flow diverged");
}

// ---------------------------------------------------------------------------
// Central-difference Jacobians of the closed-loop maps (network re-solved
// at every perturbed state).
// ---------------------------------------------------------------------------

inline MatC fd_voltage_sensitivity(const PowerSystem& sys, const VecR& x,
                                   const VecC& V, double h = 1e-6) {
    const int m = sys.n_state();
    MatC out(sys.n_bus(), m);
    for (int j = 0; j < m; ++j) {
        VecR xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const VecC Vp = solve_network(sys.net, make_injection_fn(sys, xp), V);
        const VecC Vm = solve_network(sys.net, make_injection_fn(sys, xm), V);
        out.col(j) = (Vp - Vm) / (2.0 * h);
    }
    return out;
}

inline MatR fd_trajectory_jacobian(const PowerSystem& sys, const VecR& x,
                                   const VecC& V, double h = 1e-5) {
    const int m = sys.n_state();
    MatR out(m, m);
    for (int j = 0; j < m; ++j) {
        VecR xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const VecC Vp = solve_network(sys.net, make_injection_fn(sys, xp), V);
        const VecC Vm = solve_network(sys.net, make_injection_fn(sys, xm), V);
        out.col(j) = (dynamics(sys, xp, Vp) - dynamics(sys, xm, Vm)) / (2.0 * h);
    }
    return out;
}

/// FD of the voltage-subsystem map: perturb the internal-voltage state of
/// device j, re-solve the network, evaluate d(e_i)/dt with the fast states
/// pinned to their quasi-steady manifolds.
inline MatR fd_reduced_jacobian(const PowerSystem& sys, const VecR& x,
                                const VecC& V, double h = 1e-6) {
    const int p = sys.n_dev();
    auto edot = [&](const VecR& xs) {
        const VecC Vs = solve_network(sys.net, make_injection_fn(sys, xs), V);
        VecR xm(xs);
        for (int d = 0; d < p; ++d) {
            const int b = sys.device_bus(d);
            xm(sys.sidx(d, PowerSystem::kEfd)) =
                sys.is_gfm(d)
                    ? quasi_steady_voltage_loop(std::get<GfmUnit>(sys.devices[d]).p,
                                                Vs(b))
                    : quasi_steady_exciter(std::get<SgUnit>(sys.devices[d]).p, Vs(b));
        }
        const VecR dx = dynamics(sys, xm, Vs);
        VecR de(p);
        for (int d = 0; d < p; ++d) de(d) = dx(sys.sidx(d, PowerSystem::kE));
        return de;
    };
    MatR out(p, p);
    for (int j = 0; j < p; ++j) {
        VecR xp = x, xm = x;
        xp(sys.sidx(j, PowerSystem::kE)) += h;
        xm(sys.sidx(j, PowerSystem::kE)) -= h;
        out.col(j) = (edot(xp) - edot(xm)) / (2.0 * h);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Derivative-free 2-bus network solver: coarse polar grid search followed
// by cyclic coordinate descent with golden-section line searches on the
// squared residual.
// ---------------------------------------------------------------------------

inline VecC oracle_two_bus_solve(const PowerSystem& sys, const VecR& x) {
    if (sys.n_bus() != 2) throw std::runtime_error("oracle is 2-bus only");
    auto resnorm = [&](const Eigen::Vector4d& u) {
        VecC V(2);
        V << Complex(u(0), u(1)), Complex(u(2), u(3));
        if (std::abs(V(0)) < 1e-6 || std::abs(V(1)) < 1e-6) return 1e30;
        const VecC g = injections(sys, x, V);
        return (V.conjugate().cwiseProduct(sys.net.Y * V) - g).squaredNorm();
    };

    Eigen::Vector4d best;
    double fbest = 1e300;
    for (double m0 = 0.5; m0 <= 1.4001; m0 += 0.1)
        for (double t0 = -0.6; t0 <= 0.6001; t0 += 0.1)
            for (double m1 = 0.5; m1 <= 1.4001; m1 += 0.1)
                for (double t1 = -0.6; t1 <= 0.6001; t1 += 0.1) {
                    Eigen::Vector4d u;
                    u << m0 * std::cos(t0), m0 * std::sin(t0), m1 * std::cos(t1),
                        m1 * std::sin(t1);
                    const double f = resnorm(u);
                    if (f < fbest) {
                        fbest = f;
                        best = u;
                    }
                }

    // Nelder-Mead refinement from the grid winner, restarted with a fresh
    // simplex a few times to break out of collapsed geometries.
    for (int restart = 0; restart < 6 && fbest > 1e-26; ++restart) {
        const double step = restart == 0 ? 0.05 : 0.01 / (restart + 1);
        std::vector<std::pair<double, Eigen::Vector4d>> simp;
        simp.emplace_back(fbest, best);
        for (int c = 0; c < 4; ++c) {
            Eigen::Vector4d u = best;
            u(c) += step;
            simp.emplace_back(resnorm(u), u);
        }
        for (int it = 0; it < 4000; ++it) {
            std::sort(simp.begin(), simp.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (simp.front().first < 1e-26) break;
            Eigen::Vector4d centroid = Eigen::Vector4d::Zero();
            for (int k = 0; k < 4; ++k) centroid += simp[k].second;
            centroid /= 4.0;
            const Eigen::Vector4d& worst = simp[4].second;
            const Eigen::Vector4d refl = centroid + (centroid - worst);
            const double fr = resnorm(refl);
            if (fr < simp[0].first) {
                const Eigen::Vector4d exp_ = centroid + 2.0 * (centroid - worst);
                const double fe = resnorm(exp_);
                simp[4] = fe < fr ? std::make_pair(fe, exp_) : std::make_pair(fr, refl);
            } else if (fr < simp[3].first) {
                simp[4] = {fr, refl};
            } else {
                const Eigen::Vector4d con = centroid + 0.5 * (worst - centroid);
                const double fc = resnorm(con);
                if (fc < simp[4].first) {
                    simp[4] = {fc, con};
                } else {
                    for (int k = 1; k < 5; ++k) {
                        simp[k].second =
                            simp[0].second + 0.5 * (simp[k].second - simp[0].second);
                        simp[k].first = resnorm(simp[k].second);
                    }
                }
            }
        }
        std::sort(simp.begin(), simp.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (simp.front().first < fbest) {
            fbest = simp.front().first;
            best = simp.front().second;
        }
    }
    VecC V(2);
    V << Complex(best(0), best(1)), Complex(best(2), best(3));
    return V;
}

}  // namespace oracles
