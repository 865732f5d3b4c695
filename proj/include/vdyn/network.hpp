#pragma once

// Nodal admittance construction and the nonlinear network interface solve
// Y*V = g(x, conj(V)) / conj(V), written on the stacked real/imaginary
// unknowns so that conj(V) is never an independent variable.

#include <functional>
#include <vector>

#include <Eigen/LU>

#include "vdyn/common.hpp"

namespace vdyn {

enum class BusKind { slack, device, load, passive };

struct Bus {
    int id = 0;          // dense 0..n-1 internal index
    double base_kv = 0;  // informational
    BusKind kind = BusKind::passive;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0;        // series resistance, p.u.
    double x = 0;        // series reactance, p.u.
    double b_shunt = 0;  // total line charging, p.u.
};

struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    MatC Y;            // nodal admittance, I = Y*V
    int slack = -1;
    VecC shunt_loads;  // constant-impedance load admittances folded into Y

    int n() const { return static_cast<int>(buses.size()); }
};

/// Diagonal (per-bus) injection evaluation: the conjugate-power injection
/// g_i and its partials with respect to the own-bus voltage pair.
struct Injection {
    VecC g;
    VecC dg_dV;     // diagonal of dg/dV
    VecC dg_dVbar;  // diagonal of dg/dVbar
};

using InjectionFn = std::function<Injection(const VecC& V)>;

inline NetworkModel build_admittance(std::vector<Bus> buses,
                                     std::vector<Branch> branches,
                                     VecC shunt_loads) {
    const int n = static_cast<int>(buses.size());
    if (shunt_loads.size() == 0) shunt_loads = VecC::Zero(n);
    if (shunt_loads.size() != n)
        throw ValidationError("shunt_loads", "length must equal bus count");

    int slack = -1;
    for (int i = 0; i < n; ++i) {
        if (buses[i].id != i)
            throw ValidationError("bus.id", "ids must be dense 0..n-1 in order");
        if (buses[i].kind == BusKind::slack) {
            if (slack >= 0) throw ValidationError("bus.kind", "duplicate slack bus");
            slack = i;
        }
    }

    MatC Y = MatC::Zero(n, n);
    std::vector<int> comp(n, -1);
    for (const auto& br : branches) {
        if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
            throw ValidationError("branch", "endpoint out of range");
        if (br.from == br.to)
            throw ValidationError("branch", "self-loop branch");
        if (br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch", "zero series impedance");
        const Complex y = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b_shunt / 2.0);
        Y(br.from, br.from) += y + ysh;
        Y(br.to, br.to) += y + ysh;
        Y(br.from, br.to) -= y;
        Y(br.to, br.from) -= y;
    }
    for (int i = 0; i < n; ++i) Y(i, i) += shunt_loads(i);

    // connectivity (shunts do not connect buses)
    if (n > 1) {
        std::vector<int> stack{0};
        std::vector<bool> seen(n, false);
        seen[0] = true;
        int count = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (const auto& br : branches) {
                int v = -1;
                if (br.from == u) v = br.to;
                else if (br.to == u) v = br.from;
                if (v >= 0 && !seen[v]) {
                    seen[v] = true;
                    ++count;
                    stack.push_back(v);
                }
            }
        }
        if (count != n)
            throw ValidationError("branches", "network graph is disconnected");
    }

    NetworkModel net;
    net.buses = std::move(buses);
    net.branches = std::move(branches);
    net.Y = std::move(Y);
    net.slack = slack;
    net.shunt_loads = std::move(shunt_loads);
    return net;
}

/// Y_aug = Y - diag(terms). For an SG bus the term is 0.5j(1/x_q + 1/x'_d),
/// for a GFM bus j/x_l, zero elsewhere.
inline MatC augmented_admittance(const NetworkModel& net, const VecC& device_shunt_terms) {
    if (device_shunt_terms.size() != net.n())
        throw ValidationError("device_shunt_terms", "length must equal bus count");
    MatC Yaug = net.Y;
    Yaug.diagonal() -= device_shunt_terms;
    return Yaug;
}

struct ImpedanceReport {
    MatC Z;
    // Fraction of entries of the de-rotated matrix conj(j)*Z with nonnegative
    // real part; the network rotation by j is removed so "nonnegative" is
    // meaningful for predominantly reactive networks.
    double real_nonneg_fraction = 0;
    // Rows whose diagonal entry carries the largest magnitude in the row.
    // (Row-sum dominance does not hold for meshed networks; the magnitude
    // ordering is the property the impedance structure actually exhibits.)
    double diag_dominance_fraction = 0;
};

inline ImpedanceReport impedance_matrix(const MatC& Yaug) {
    const int n = static_cast<int>(Yaug.rows());
    Eigen::FullPivLU<MatC> lu(Yaug);
    if (!lu.isInvertible()) throw SingularMatrix("Y_aug is singular");
    ImpedanceReport rep;
    rep.Z = lu.inverse();

    int nonneg = 0;
    int dominant = 0;
    for (int i = 0; i < n; ++i) {
        double offmax = 0;
        for (int j = 0; j < n; ++j) {
            if ((-kImag * rep.Z(i, j)).real() >= -1e-12) ++nonneg;
            if (j != i) offmax = std::max(offmax, std::abs(rep.Z(i, j)));
        }
        if (std::abs(rep.Z(i, i)) >= offmax - 1e-12) ++dominant;
    }
    rep.real_nonneg_fraction = double(nonneg) / double(n * n);
    rep.diag_dominance_fraction = double(dominant) / double(n);
    return rep;
}

namespace detail {

/// Newton Jacobian of r = diag(conj(V))*Y*V - g on stacked [Re V; Im V].
inline MatR stacked_real_jacobian(const MatC& P, const MatC& Q) {
    const int n = static_cast<int>(P.rows());
    MatR J(2 * n, 2 * n);
    const MatC dda = P + Q;                // dr/d(Re V)
    const MatC ddb = kImag * (P - Q);      // dr/d(Im V)
    J.topLeftCorner(n, n) = dda.real();
    J.topRightCorner(n, n) = ddb.real();
    J.bottomLeftCorner(n, n) = dda.imag();
    J.bottomRightCorner(n, n) = ddb.imag();
    return J;
}

}  // namespace detail

inline constexpr double kNetworkTol = 1e-10;
inline constexpr int kNetworkMaxIter = 80;

/// Solves diag(conj(V))*Y*V = g(x, V) for V by damped Newton iteration on
/// the real/imaginary split. Backtracking keeps severe operating points
/// (faults, heavy constant-power load) inside the basin; near the solution
/// full steps are taken and convergence is quadratic. Residual guaranteed
/// <= 1e-10 in infinity norm.
inline VecC solve_network(const NetworkModel& net, const InjectionFn& injection,
                          const VecC& V_guess) {
    const int n = net.n();
    if (V_guess.size() != n)
        throw ValidationError("V_guess", "length must equal bus count");
    for (int i = 0; i < n; ++i)
        if (std::abs(V_guess(i)) == 0.0)
            throw ValidationError("V_guess", "zero entry at bus " + std::to_string(i));

    VecC V = V_guess;
    Injection inj = injection(V);

    // Rows with identically zero injection (no device, no constant-power
    // load) keep the linear current balance (Y*V)_i = 0. The power form
    // conj(V_i)*(Y*V)_i = 0 would admit the spurious root V_i = 0, which
    // Newton can reach from a depressed (post-fault) warm start.
    std::vector<bool> passive(n);
    for (int i = 0; i < n; ++i)
        passive[i] = inj.g(i) == Complex(0.0) && inj.dg_dV(i) == Complex(0.0) &&
                     inj.dg_dVbar(i) == Complex(0.0);

    auto residual = [&](const VecC& Vr, const Injection& ir) -> VecC {
        const VecC I = net.Y * Vr;
        VecC r = Vr.conjugate().cwiseProduct(I) - ir.g;
        for (int i = 0; i < n; ++i)
            if (passive[i]) r(i) = I(i);
        return r;
    };

    VecC r = residual(V, inj);
    double resnorm = r.cwiseAbs().maxCoeff();

    for (int it = 0; it < kNetworkMaxIter; ++it) {
        // iterate past the contract tolerance while cheap; Newton is quadratic
        if (resnorm <= 1e-13) return V;

        MatC P = V.conjugate().asDiagonal() * net.Y;  // dr/dV
        P.diagonal() -= inj.dg_dV;
        MatC Q = MatC::Zero(n, n);                    // dr/dVbar
        Q.diagonal() = net.Y * V - inj.dg_dVbar;
        for (int i = 0; i < n; ++i) {
            if (passive[i]) {
                P.row(i) = net.Y.row(i);
                Q(i, i) = 0.0;
            }
        }

        const MatR J = detail::stacked_real_jacobian(P, Q);
        Eigen::PartialPivLU<MatR> lu(J);
        VecR rhs(2 * n);
        rhs.head(n) = r.real();
        rhs.tail(n) = r.imag();
        const VecR du = lu.solve(rhs);
        if (!du.allFinite()) throw SingularNetworkJacobian();

        double alpha = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40 && !accepted; ++bt, alpha *= 0.5) {
            VecC Vt = V;
            for (int i = 0; i < n; ++i)
                Vt(i) -= alpha * Complex(du(i), du(n + i));
            try {
                const Injection injt = injection(Vt);
                const VecC rt = residual(Vt, injt);
                const double nt = rt.cwiseAbs().maxCoeff();
                if (std::isfinite(nt) && nt < resnorm) {
                    V = Vt;
                    inj = injt;
                    r = rt;
                    resnorm = nt;
                    accepted = true;
                }
            } catch (const LowVoltageRegime&) {
                // step left a device bus without usable voltage; shorten it
            }
        }
        if (!accepted) break;  // stagnated: no descent along the Newton ray
    }
    if (resnorm <= kNetworkTol) return V;
    throw NonConvergence(kNetworkMaxIter, resnorm);
}

}  // namespace vdyn
