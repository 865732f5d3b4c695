#pragma once

// Monotone-systems analysis: sign patterns, the cooperativity test of the
// three-condition theorem, regime classification, Gershgorin stability
// certificates, trajectory ordering checks, variation-equation positivity,
// and the load-shedding homotopy-derivative scan.

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>

#include "vdyn/simulator.hpp"

namespace vdyn {

// ---------------------------------------------------------------------------
// Sign patterns
// ---------------------------------------------------------------------------

struct SignMatrix {
    Eigen::MatrixXi signs;  // entries in {-1, 0, +1}
    double eps_abs = 0;
    double source_time = 0;
};

inline SignMatrix sign_pattern(const MatR& m, double eps_rel = 1e-6,
                               double source_time = 0) {
    if (!m.allFinite()) throw ValidationError("matrix", "non-finite entries");
    if (!(eps_rel > 0 && eps_rel < 1))
        throw ValidationError("eps_rel", "must be in (0,1)");
    SignMatrix sm;
    sm.eps_abs = eps_rel * m.cwiseAbs().maxCoeff();
    sm.source_time = source_time;
    sm.signs.resize(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            sm.signs(i, j) = m(i, j) > sm.eps_abs ? 1 : (m(i, j) < -sm.eps_abs ? -1 : 0);
    return sm;
}

// ---------------------------------------------------------------------------
// Cooperativity test (Metzler state, nonnegative input and output maps)
// ---------------------------------------------------------------------------

struct MonotoneVerdict {
    enum class Verdict {
        input_state_output_monotone,
        input_output_only,
        competitive,
        indeterminate
    };
    bool is_metzler_state = false;
    bool input_nonneg = false;
    bool output_nonneg = false;
    Verdict verdict = Verdict::indeterminate;
    // (block tag 'x'/'v'/'h', row, col, value)
    std::vector<std::tuple<char, int, int, double>> violating_entries;
};

inline MonotoneVerdict check_theorem1(const MatR& dfdx, const MatR& dfdv,
                                      const MatR& dhdx, double eps = 0.0) {
    if (dfdx.rows() != dfdx.cols() || dfdv.rows() != dfdx.rows() ||
        dhdx.cols() != dfdx.cols())
        throw ValidationError("matrices", "inconsistent dimensions");

    MonotoneVerdict v;
    v.is_metzler_state = true;
    bool all_offdiag_nonpos = true;
    bool any_neg = false;
    for (int i = 0; i < dfdx.rows(); ++i) {
        for (int j = 0; j < dfdx.cols(); ++j) {
            if (i == j) continue;
            if (dfdx(i, j) < -eps) {
                v.is_metzler_state = false;
                any_neg = true;
                v.violating_entries.emplace_back('x', i, j, dfdx(i, j));
            }
            if (dfdx(i, j) > eps) all_offdiag_nonpos = false;
        }
    }
    v.input_nonneg = true;
    for (int i = 0; i < dfdv.rows(); ++i)
        for (int j = 0; j < dfdv.cols(); ++j)
            if (dfdv(i, j) < -eps) {
                v.input_nonneg = false;
                v.violating_entries.emplace_back('v', i, j, dfdv(i, j));
            }
    v.output_nonneg = true;
    for (int i = 0; i < dhdx.rows(); ++i)
        for (int j = 0; j < dhdx.cols(); ++j)
            if (dhdx(i, j) < -eps) {
                v.output_nonneg = false;
                v.violating_entries.emplace_back('h', i, j, dhdx(i, j));
            }

    if (v.is_metzler_state && v.input_nonneg && v.output_nonneg)
        v.verdict = MonotoneVerdict::Verdict::input_state_output_monotone;
    else if (all_offdiag_nonpos && any_neg)
        v.verdict = MonotoneVerdict::Verdict::competitive;
    else
        v.verdict = MonotoneVerdict::Verdict::indeterminate;
    return v;
}

enum class Regime { cooperative, competitive, mixed };

inline Regime classify_regime(const MatR& J, double eps) {
    if (J.rows() != J.cols()) throw ValidationError("J", "must be square");
    bool all_nonneg = true, all_nonpos = true, any_neg = false;
    for (int i = 0; i < J.rows(); ++i)
        for (int j = 0; j < J.cols(); ++j) {
            if (i == j) continue;
            if (J(i, j) < -eps) {
                all_nonneg = false;
                any_neg = true;
            }
            if (J(i, j) > eps) all_nonpos = false;
        }
    if (all_nonneg) return Regime::cooperative;
    if (all_nonpos && any_neg) return Regime::competitive;
    return Regime::mixed;
}

/// Threshold for "small off-diagonal" reporting: |off| < frac * min |diag|.
inline double small_offdiag_threshold(const MatR& J, double frac = 0.1) {
    return frac * J.diagonal().cwiseAbs().minCoeff();
}

// ---------------------------------------------------------------------------
// Gershgorin certificate
// ---------------------------------------------------------------------------

struct GershgorinCertificate {
    struct Disc {
        double center;
        double radius;
    };
    bool certified_stable = false;
    std::vector<Disc> discs;
    double spectral_abscissa = 0;
};

inline GershgorinCertificate gershgorin_certificate(const MatR& J) {
    if (J.rows() != J.cols() || !J.allFinite())
        throw ValidationError("J", "must be square and finite");
    GershgorinCertificate cert;
    cert.certified_stable = true;
    for (int i = 0; i < J.rows(); ++i) {
        double radius = 0;
        for (int j = 0; j < J.cols(); ++j)
            if (j != i) radius += std::abs(J(i, j));
        cert.discs.push_back({J(i, i), radius});
        if (J(i, i) + radius >= 0) cert.certified_stable = false;
    }
    const Eigen::EigenSolver<MatR> es(J);
    cert.spectral_abscissa = es.eigenvalues().real().maxCoeff();
    return cert;
}

// ---------------------------------------------------------------------------
// Trajectory ordering
// ---------------------------------------------------------------------------

struct OrderingReport {
    bool holds = true;
    double worst_violation = 0;
    std::optional<double> first_violation_time;
};

/// Componentwise hi >= lo - tol on every sample; signal columns aligned.
inline OrderingReport ordering_check(const std::vector<double>& times,
                                     const MatR& hi, const MatR& lo, double tol) {
    if (hi.rows() != lo.rows() || hi.cols() != lo.cols() ||
        static_cast<int>(times.size()) != hi.rows())
        throw ValidationError("ordering", "mismatched time grids");
    OrderingReport rep;
    for (int k = 0; k < hi.rows(); ++k) {
        for (int c = 0; c < hi.cols(); ++c) {
            const double gap = hi(k, c) - lo(k, c);
            if (gap < -tol) {
                rep.holds = false;
                if (!rep.first_violation_time) rep.first_violation_time = times[k];
            }
            rep.worst_violation = std::min(rep.worst_violation, gap);
        }
    }
    rep.worst_violation = -rep.worst_violation;  // report as a magnitude
    if (rep.worst_violation < 0) rep.worst_violation = 0;
    return rep;
}

// --- named signal extraction from a TimeSeries ---

inline VecR signal_series(const PowerSystem& sys, const TimeSeries& ts,
                          const std::string& name) {
    const auto colon = name.find(':');
    const std::string kind = name.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : name.substr(colon + 1);
    const int ns = ts.n_samples();
    if (kind == "vmag") return ts.vmag.col(std::stoi(arg)).head(ns);
    if (kind == "vang") {
        VecR out(ns);
        for (int k = 0; k < ns; ++k) out(k) = std::arg(ts.voltages(k, std::stoi(arg)));
        return out;
    }
    if (kind == "pe" || kind == "qc") {
        const int d = sys.device_at_bus(std::stoi(arg));
        if (d < 0) throw ValidationError("signal", "no device at bus " + arg);
        return (kind == "pe" ? ts.pe : ts.qc).col(d).head(ns);
    }
    if (kind == "state") {
        const auto labels = sys.state_labels();
        for (int i = 0; i < static_cast<int>(labels.size()); ++i)
            if (labels[i] == arg) return ts.states.col(i).head(ns);
        throw ValidationError("signal", "unknown state label " + arg);
    }
    throw ValidationError("signal", "unknown signal " + name);
}

inline MatR signal_matrix(const PowerSystem& sys, const TimeSeries& ts,
                          const std::vector<std::string>& names) {
    MatR out(ts.n_samples(), names.size());
    for (int c = 0; c < static_cast<int>(names.size()); ++c)
        out.col(c) = signal_series(sys, ts, names[c]);
    return out;
}

struct ScenarioOrderingReport {
    OrderingReport ordering;
    std::vector<std::string> signals;
    std::string base_name, variant_name;
};

/// Delegates to ordering_check on the selected signals; variant is expected
/// to dominate base.
inline ScenarioOrderingReport compare_scenarios(const PowerSystem& sys,
                                                const TimeSeries& base,
                                                const TimeSeries& variant,
                                                const std::vector<std::string>& signals,
                                                double tol) {
    if (base.n_samples() != variant.n_samples())
        throw ValidationError("compare_scenarios", "mismatched sample grids");
    ScenarioOrderingReport rep;
    rep.signals = signals;
    rep.ordering = ordering_check(base.times, signal_matrix(sys, variant, signals),
                                  signal_matrix(sys, base, signals), tol);
    return rep;
}

// ---------------------------------------------------------------------------
// Fig.-3 style voltage-subsystem sign template
// ---------------------------------------------------------------------------

/// Extracts the voltage-subsystem block of J_full ordered [all efd; all e].
inline MatR voltage_subsystem_matrix(const PowerSystem& sys, const MatR& J_full) {
    const int p = sys.n_dev();
    MatR M(2 * p, 2 * p);
    auto src = [&](int r) {
        return r < p ? sys.sidx(r, PowerSystem::kEfd)
                     : sys.sidx(r - p, PowerSystem::kE);
    };
    for (int i = 0; i < 2 * p; ++i)
        for (int j = 0; j < 2 * p; ++j) M(i, j) = J_full(src(i), src(j));
    return M;
}

/// Template violations: a strong sign opposite to the expected block sign.
/// Entries classified 0 never violate; the cross-coupling diagonals must
/// carry their expected strict sign.
inline int sign_template_violations(const MatR& M, int p, double eps_rel = 1e-6) {
    const auto sm = sign_pattern(M, eps_rel);
    int bad = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            const int ff = sm.signs(i, j);          // defd/defd: -I
            const int fe = sm.signs(i, p + j);      // defd/de:   <= 0
            const int ef = sm.signs(p + i, j);      // de/defd:   +I
            const int ee = sm.signs(p + i, p + j);  // de/de:     Metzler
            if (i == j) {
                if (ff != -1) ++bad;
                if (ef != 1) ++bad;
                if (ee == 1) ++bad;  // diagonal must not be positive
            } else {
                if (ff != 0) ++bad;
                if (ef != 0) ++bad;
                if (ee == -1) ++bad;  // off-diagonal must not be negative
            }
            if (fe == 1) ++bad;  // exciter feedback must not be positive
        }
    }
    return bad;
}

/// Fraction of stored Jacobian snapshots whose voltage subsystem matches
/// the template, optionally restricted to a time window.
inline double sign_template_match_fraction(const PowerSystem& sys, const TimeSeries& ts,
                                           double t_lo = -1e300, double t_hi = 1e300,
                                           double eps_rel = 1e-6) {
    int total = 0, ok = 0;
    for (std::size_t s = 0; s < ts.snapshots.size(); ++s) {
        const double t = ts.snapshot_times[s];
        if (t < t_lo || t > t_hi) continue;
        ++total;
        const MatR M = voltage_subsystem_matrix(sys, ts.snapshots[s].J_full);
        if (sign_template_violations(M, sys.n_dev(), eps_rel) == 0) ++ok;
    }
    return total == 0 ? 0.0 : double(ok) / double(total);
}

// ---------------------------------------------------------------------------
// Variation-equation positivity
// ---------------------------------------------------------------------------

struct VariationResult {
    bool positive = true;
    double min_component = 0;
};

/// Integrates dx' = Gamma(t) dx + Lambda(t) dv along stored snapshots with
/// linear interpolation, RK4 substeps between snapshot times.
inline VariationResult variation_positivity(const std::vector<double>& times,
                                            const std::vector<MatR>& gammas,
                                            const std::vector<MatR>& lambdas,
                                            const VecR& dv, const VecR& dx0,
                                            double tol = 1e-8, int substeps = 10) {
    if (times.size() != gammas.size() || times.size() != lambdas.size() ||
        times.size() < 2)
        throw ValidationError("variation", "snapshots misaligned with times");
    if ((dv.array() < 0).any())
        throw ValidationError("dv", "must be entrywise nonnegative");

    VecR dx = dx0;
    VariationResult res;
    res.min_component = dx.size() ? dx.minCoeff() : 0.0;

    auto interp = [&](std::size_t k, double a, const std::vector<MatR>& mats) {
        return ((1.0 - a) * mats[k] + a * mats[k + 1]).eval();
    };
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double h = (times[k + 1] - times[k]) / substeps;
        for (int s = 0; s < substeps; ++s) {
            const double a0 = double(s) / substeps;
            const double am = (s + 0.5) / substeps;
            const double a1 = double(s + 1) / substeps;
            const MatR G0 = interp(k, a0, gammas), Gm = interp(k, am, gammas),
                       G1 = interp(k, a1, gammas);
            const MatR L0 = interp(k, a0, lambdas), Lm = interp(k, am, lambdas),
                       L1 = interp(k, a1, lambdas);
            const VecR k1 = G0 * dx + L0 * dv;
            const VecR k2 = Gm * (dx + 0.5 * h * k1) + Lm * dv;
            const VecR k3 = Gm * (dx + 0.5 * h * k2) + Lm * dv;
            const VecR k4 = G1 * (dx + h * k3) + L1 * dv;
            dx += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            res.min_component = std::min(res.min_component, dx.minCoeff());
        }
    }
    res.positive = res.min_component >= -tol;
    return res;
}

/// Input matrix of the reduced voltage subsystem with v = V_ref:
/// dE'/dV_ref = K_A/T'_d0 for an SG, K_u/K_i for a GFM (diagonal).
inline MatR reduced_input_matrix(const PowerSystem& sys) {
    const int p = sys.n_dev();
    MatR L = MatR::Zero(p, p);
    for (int d = 0; d < p; ++d) {
        if (sys.is_gfm(d)) {
            const auto& u = std::get<GfmUnit>(sys.devices[d]).p;
            L(d, d) = u.k_u / u.k_i;
        } else {
            const auto& u = std::get<SgUnit>(sys.devices[d]).p;
            L(d, d) = u.k_a / u.t_d0p;
        }
    }
    return L;
}

// ---------------------------------------------------------------------------
// Load-shedding homotopy scan
// ---------------------------------------------------------------------------

struct UpsilonScan {
    VecR sigma_grid;
    MatR upsilon_prime;  // per output bus x sigma, minimized over sample times
    double min_value = 0;
    double integral_lower_bound = 0;
};

struct UpsilonOptions {
    double t_end = 5.0;
    double dt = 1e-3;
    int t_stride = 50;   // samples between scan evaluations
    int sigma_steps = 20;
    double fd_step = 1e-4;  // shed perturbation for d|V|/dQ
};

/// Scans the homotopy derivative between two load-shedding inputs at one
/// bus (shed_q1 >= shed_q2, p.u. reactive sheds applied at t = 0).
inline UpsilonScan upsilon_scan(const PowerSystem& sys_in, int shed_bus,
                                double shed_q1, double shed_q2,
                                const UpsilonOptions& opt = {}) {
    if (shed_q1 < shed_q2)
        throw ValidationError("shed", "shed_q1 must dominate shed_q2");
    const Equilibrium eq = init_equilibrium(sys_in);
    const PowerSystem& sys = eq.sys;
    const int n = sys.n_bus();
    const int p = sys.n_dev();

    auto make_scenario = [&](double q) {
        Scenario sc;
        sc.t_end = opt.t_end;
        sc.dt = opt.dt;
        sc.jacobian_stride = 0;
        Event ev;
        ev.time = 0;
        ev.kind = Event::Kind::load_shed;
        ev.bus = shed_bus;
        ev.dq = q;
        sc.events.push_back(ev);
        return sc;
    };
    const TimeSeries ts1 = run(sys, make_scenario(shed_q1), eq.x0, eq.V0);
    const TimeSeries ts2 = run(sys, make_scenario(shed_q2), eq.x0, eq.V0);
    if (ts1.failed || ts2.failed)
        throw VdynError("upsilon scan: simulation failed: " +
                        (ts1.failed ? ts1.fail_reason : ts2.fail_reason));

    UpsilonScan scan;
    scan.sigma_grid.resize(opt.sigma_steps + 1);
    for (int s = 0; s <= opt.sigma_steps; ++s)
        scan.sigma_grid(s) = double(s) / opt.sigma_steps;
    scan.upsilon_prime = MatR::Constant(n, opt.sigma_steps + 1, 1e300);

    auto shed_system = [&](double q) {
        PowerSystem s = sys;
        bool found = false;
        for (auto& ld : s.loads)
            if (ld.bus == shed_bus) {
                ld.q -= q;
                found = true;
            }
        if (!found) throw ValidationError("shed_bus", "no load at shed bus");
        return s;
    };

    for (int k = 0; k < ts1.n_samples(); k += opt.t_stride) {
        const VecR x1 = ts1.states.row(k).transpose();
        const VecR x2 = ts2.states.row(k).transpose();
        VecR dE(p);
        for (int d = 0; d < p; ++d) {
            const int e = sys.sidx(d, PowerSystem::kE);
            dE(d) = x1(e) - x2(e);
        }
        for (int s = 0; s <= opt.sigma_steps; ++s) {
            const double sig = scan.sigma_grid(s);
            const VecR xs = x2 + sig * (x1 - x2);
            const double shed = shed_q2 + sig * (shed_q1 - shed_q2);
            const PowerSystem sys_s = shed_system(shed);
            // warm start from the recorded trajectory voltages interpolated
            // in sigma: always close to the sigma-point solution, unlike a
            // guess carried over from the previous grid point
            const VecC Vguess = ts2.voltages.row(k).transpose() +
                                sig * (ts1.voltages.row(k).transpose() -
                                       ts2.voltages.row(k).transpose());
            const VecC V = solve_network(sys_s.net, make_injection_fn(sys_s, xs), Vguess);

            SensitivityBundle b = assemble_abc(sys_s, xs, V);
            voltage_sensitivity_exact(b);
            MatC dV_dE(n, p);
            for (int d = 0; d < p; ++d)
                dV_dE.col(d) = b.dV_dx.col(sys.sidx(d, PowerSystem::kE));
            const MatR dvmag_dE = voltage_magnitude_sensitivity(dV_dE, V);

            // d|V|/dv by central differences on the shed amount
            const PowerSystem sp = shed_system(shed + opt.fd_step);
            const PowerSystem sm = shed_system(shed - opt.fd_step);
            const VecC Vp = solve_network(sp.net, make_injection_fn(sp, xs), V);
            const VecC Vm = solve_network(sm.net, make_injection_fn(sm, xs), V);
            const VecR dvmag_dv =
                (Vp.cwiseAbs() - Vm.cwiseAbs()) / (2.0 * opt.fd_step);

            const VecR ups = dvmag_dE * dE + dvmag_dv * (shed_q1 - shed_q2);
            for (int i = 0; i < n; ++i)
                scan.upsilon_prime(i, s) = std::min(scan.upsilon_prime(i, s), ups(i));
        }
    }
    scan.min_value = scan.upsilon_prime.minCoeff();
    scan.integral_lower_bound = scan.min_value;  // grid width is 1 - 0
    return scan;
}

}  // namespace vdyn
