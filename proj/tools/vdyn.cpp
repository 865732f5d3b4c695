// Command-line front end: simulation, Jacobian extraction, sign patterns,
// ordering checks, the load-shedding scan, reduced-order comparison, and the
// small linear demo. All outputs are written atomically into a directory.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vdyn/vdyn.hpp"

namespace {

using namespace vdyn;

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

struct Loaded {
    CaseFile cf;
    BuiltCase bc;
    Equilibrium eq;
};

Loaded load(const std::string& path) {
    Loaded l;
    l.cf = parse_case_file(path);
    l.bc = build_case(l.cf);
    l.eq = init_equilibrium(l.bc.sys);
    return l;
}

std::vector<std::string> jac_labels(const BuiltCase& bc) {
    std::vector<std::string> labels;
    static const char* comp[] = {"delta", "omega", "e", "efd"};
    for (int d = 0; d < bc.sys.n_dev(); ++d) {
        const std::string tag =
            (bc.sys.is_gfm(d) ? "gfm" : "sg") +
            std::to_string(bc.external_ids[bc.sys.device_bus(d)]);
        for (int c = 0; c < 4; ++c) labels.push_back(tag + ":" + comp[c]);
    }
    return labels;
}

std::vector<std::string> dev_labels(const BuiltCase& bc, const char* comp) {
    std::vector<std::string> labels;
    for (int d = 0; d < bc.sys.n_dev(); ++d)
        labels.push_back((bc.sys.is_gfm(d) ? "gfm" : "sg") +
                         std::to_string(bc.external_ids[bc.sys.device_bus(d)]) +
                         ":" + comp);
    return labels;
}

std::vector<std::string> bus_labels(const BuiltCase& bc) {
    std::vector<std::string> labels;
    for (int i = 0; i < bc.sys.n_bus(); ++i)
        labels.push_back("bus" + std::to_string(bc.external_ids[i]));
    return labels;
}

/// State and voltage at time t along a scenario (last sample of a truncated
/// run); t = 0 gives the scenario's initial point.
void point_at(const Loaded& l, const std::string& scenario, double at, VecR& x,
              VecC& V) {
    if (scenario.empty() || at <= 0) {
        x = l.eq.x0;
        V = l.eq.V0;
        return;
    }
    Scenario sc = l.bc.scenario(scenario);
    sc.t_end = at;
    sc.jacobian_stride = 0;
    const TimeSeries ts = run(l.eq.sys, sc, l.eq.x0, l.eq.V0);
    if (ts.failed) throw VdynError("simulation failed: " + ts.fail_reason);
    x = ts.states.row(ts.n_samples() - 1).transpose();
    V = ts.voltages.row(ts.n_samples() - 1).transpose();
}

int cmd_simulate(const std::string& case_path, const std::string& scenario,
                 bool reduced, const std::string& out_dir) {
    const Loaded l = load(case_path);
    const Scenario sc = l.bc.scenario(scenario);
    const TimeSeries ts = reduced ? run_reduced(l.eq.sys, sc, l.eq.x0, l.eq.V0)
                                  : run(l.eq.sys, sc, l.eq.x0, l.eq.V0);

    ResultBundle rb;
    std::vector<std::string> sigs = sc.record;
    if (sigs.empty()) sigs = default_signals(l.bc);
    rb.add("trajectory.csv", run_csv(l.bc, ts, sigs));
    rb.add("trajectory.gp", gnuplot_timeseries("trajectory.csv", sigs,
                                               scenario, "signal value"));
    if (!ts.snapshots.empty()) {
        const auto labels = jac_labels(l.bc);
        std::string idx = "index,t\n";
        for (std::size_t s = 0; s < ts.snapshots.size(); ++s) {
            idx += std::to_string(s) + "," +
                   detail::csv_num(ts.snapshot_times[s]) + "\n";
            rb.add("jacobian_" + std::to_string(s) + ".csv",
                   matrix_csv(ts.snapshots[s].J_full, labels, labels));
        }
        rb.add("jacobian_index.csv", idx);
    }
    write_results(rb, out_dir);
    if (ts.failed) {
        std::cerr << "simulation failed at t=" << ts.times.back() << ": "
                  << ts.fail_reason << "\n";
        return 1;
    }
    std::cout << "wrote " << ts.n_samples() << " samples and "
              << ts.snapshots.size() << " Jacobian snapshots to " << out_dir
              << "\n";
    return 0;
}

int cmd_jacobian(const std::string& case_path, const std::string& scenario,
                 double at, bool approx, const std::string& out_dir) {
    const Loaded l = load(case_path);
    VecR x;
    VecC V;
    point_at(l, scenario, at, x, V);

    JacobianReport rep;
    if (approx) {
        SensitivityBundle b = assemble_abc(l.eq.sys, x, V);
        voltage_sensitivity_approx(b);
        const auto parts = all_partials(l.eq.sys, x, V);
        rep.t = at;
        rep.J_full = detail::compose_full_jacobian(l.eq.sys, parts, b.dV_dx);
        rep.state_labels = l.eq.sys.state_labels();
    } else {
        rep = trajectory_jacobian(l.eq.sys, x, V, at);
    }

    const auto labels = jac_labels(l.bc);
    ResultBundle rb;
    rb.add("jacobian_full.csv", matrix_csv(rep.J_full, labels, labels));
    rb.add("jacobian_full_signs.csv",
           sign_matrix_csv(sign_pattern(rep.J_full), labels));
    if (!approx) {
        const auto dl = dev_labels(l.bc, "e");
        rb.add("jacobian_reduced.csv", matrix_csv(rep.J_reduced, dl, dl));
        rb.add("vmag_sensitivity.csv",
               matrix_csv(rep.dVmag_dE, bus_labels(l.bc), dl));
    }
    write_results(rb, out_dir);
    std::cout << "Jacobian (" << (approx ? "approximate" : "exact")
              << " voltage sensitivity) at t=" << at << " written to "
              << out_dir << "\n";
    return 0;
}

int cmd_signpattern(const std::string& case_path, const std::string& scenario,
                    double at, double eps_rel, const std::string& out_dir) {
    const Loaded l = load(case_path);
    VecR x;
    VecC V;
    point_at(l, scenario, at, x, V);
    const JacobianReport rep = trajectory_jacobian(l.eq.sys, x, V, at);

    const auto labels = jac_labels(l.bc);
    const MatR M = voltage_subsystem_matrix(l.eq.sys, rep.J_full);
    const int viol = sign_template_violations(M, l.eq.sys.n_dev(), eps_rel);

    ResultBundle rb;
    rb.add("jacobian_full_signs.csv",
           sign_matrix_csv(sign_pattern(rep.J_full, eps_rel), labels));
    std::vector<std::string> sub;
    for (const char* c : {"efd", "e"})
        for (const auto& s : dev_labels(l.bc, c)) sub.push_back(s);
    rb.add("voltage_subsystem_signs.csv",
           sign_matrix_csv(sign_pattern(M, eps_rel), sub));
    rb.add("voltage_subsystem.csv", matrix_csv(M, sub, sub));
    write_results(rb, out_dir);

    std::cout << "voltage-subsystem template violations: " << viol << "\n";
    const Regime reg = classify_regime(rep.J_reduced,
                                       eps_rel * rep.J_reduced.cwiseAbs().maxCoeff());
    std::cout << "reduced Jacobian regime: "
              << (reg == Regime::cooperative
                      ? "cooperative"
                      : reg == Regime::competitive ? "competitive" : "mixed")
              << "\n";
    return 0;
}

int cmd_monotone_check(const std::string& case_path, const std::string& pair,
                       const std::string& signals, double tol,
                       const std::string& out_dir) {
    const auto names = split_csv_list(pair);
    if (names.size() != 2)
        throw ValidationError("scenario-pair", "expected exactly two names");
    const Loaded l = load(case_path);
    const Scenario sc_lo = l.bc.scenario(names[0]);
    const Scenario sc_hi = l.bc.scenario(names[1]);
    std::vector<std::string> sigs = split_csv_list(signals);
    if (sigs.empty()) sigs = sc_lo.record.empty() ? default_signals(l.bc)
                                                  : sc_lo.record;
    std::vector<std::string> internal;
    for (const auto& s : sigs) internal.push_back(internal_signal_name(l.bc, s));

    const TimeSeries lo = run(l.eq.sys, sc_lo, l.eq.x0, l.eq.V0);
    const TimeSeries hi = run(l.eq.sys, sc_hi, l.eq.x0, l.eq.V0);
    if (lo.failed || hi.failed)
        throw VdynError("simulation failed: " +
                        (lo.failed ? lo.fail_reason : hi.fail_reason));
    const auto rep = compare_scenarios(l.eq.sys, lo, hi, internal, tol);

    ResultBundle rb;
    rb.add("base.csv", run_csv(l.bc, lo, sigs));
    rb.add("variant.csv", run_csv(l.bc, hi, sigs));
    rb.add("base.gp", gnuplot_timeseries("base.csv", sigs, names[0], "value"));
    rb.add("variant.gp", gnuplot_timeseries("variant.csv", sigs, names[1], "value"));
    write_results(rb, out_dir);

    std::cout << "ordering " << names[1] << " >= " << names[0] << ": "
              << (rep.ordering.holds ? "holds" : "violated") << "\n";
    std::cout << "worst violation: " << rep.ordering.worst_violation << "\n";
    if (rep.ordering.first_violation_time)
        std::cout << "first violation at t=" << *rep.ordering.first_violation_time
                  << "\n";
    return rep.ordering.holds ? 0 : 1;
}

int cmd_loadshed_scan(const std::string& case_path, int bus, double shed_lo,
                      double shed_hi, int sigma_steps, const std::string& out_dir) {
    const CaseFile cf = parse_case_file(case_path);
    const BuiltCase bc = build_case(cf);
    const auto it = bc.to_internal.find(bus);
    if (it == bc.to_internal.end())
        throw ValidationError("bus", "unknown bus " + std::to_string(bus));

    UpsilonOptions opt;
    opt.sigma_steps = sigma_steps;
    const UpsilonScan scan = upsilon_scan(bc.sys, it->second, shed_hi, shed_lo, opt);

    std::string csv = "sigma";
    for (int i = 0; i < bc.sys.n_bus(); ++i)
        csv += ",bus" + std::to_string(bc.external_ids[i]);
    csv += "\n";
    for (int s = 0; s < scan.sigma_grid.size(); ++s) {
        csv += detail::csv_num(scan.sigma_grid(s));
        for (int i = 0; i < bc.sys.n_bus(); ++i)
            csv += "," + detail::csv_num(scan.upsilon_prime(i, s));
        csv += "\n";
    }
    ResultBundle rb;
    rb.add("upsilon_scan.csv", csv);
    rb.add("upsilon_scan.gp",
           gnuplot_upsilon("upsilon_scan.csv", bc.sys.n_bus(), "upsilon_scan"));
    write_results(rb, out_dir);

    std::cout << "scan minimum: " << scan.min_value << "\n";
    std::cout << "integral lower bound: " << scan.integral_lower_bound << "\n";
    std::cout << (scan.min_value >= 0
                      ? "larger shed dominates pointwise\n"
                      : "no pointwise dominance certificate\n");
    return 0;
}

int cmd_linear_demo(const std::string& scales_arg, const std::string& out_dir) {
    const auto scale_toks = split_csv_list(scales_arg);
    std::vector<double> scales;
    for (const auto& t : scale_toks) scales.push_back(std::stod(t));
    if (scales.size() < 2) throw ValidationError("scales", "need at least two");

    const auto verdict = check_theorem1(linear_demo_A(), linear_demo_b(),
                                        linear_demo_c().transpose());
    std::cout << "demo system verdict: "
              << (verdict.verdict ==
                          MonotoneVerdict::Verdict::input_state_output_monotone
                      ? "input-state-output monotone"
                      : "not certified monotone")
              << "\n";

    ResultBundle rb;
    std::vector<LinearDemoSeries> runs;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        runs.push_back(run_linear_demo(scales[i]));
        MatR cols(runs[i].states.rows(), 4);
        cols.leftCols(3) = runs[i].states;
        cols.col(3) = runs[i].y;
        rb.add("demo_" + std::to_string(i) + ".csv",
               timeseries_csv(runs[i].times, {"x1", "x2", "x3", "y"}, cols));
    }
    write_results(rb, out_dir);

    bool ordered = true;
    for (std::size_t i = 0; i + 1 < scales.size(); ++i) {
        const auto& a = scales[i] <= scales[i + 1] ? runs[i] : runs[i + 1];
        const auto& b = scales[i] <= scales[i + 1] ? runs[i + 1] : runs[i];
        const auto rep = ordering_check(a.times, b.y, a.y, 1e-12);
        if (!rep.holds) ordered = false;
    }
    std::cout << "output ordering across scales: "
              << (ordered ? "holds" : "violated") << "\n";
    return ordered ? 0 : 1;
}

int cmd_reduce(const std::string& case_path, const std::string& scenario,
               const std::string& out_dir) {
    const Loaded l = load(case_path);
    const Scenario sc = l.bc.scenario(scenario);
    const TimeSeries full = run(l.eq.sys, sc, l.eq.x0, l.eq.V0);
    const TimeSeries red = run_reduced(l.eq.sys, sc, l.eq.x0, l.eq.V0);
    if (full.failed || red.failed)
        throw VdynError("simulation failed: " +
                        (full.failed ? full.fail_reason : red.fail_reason));

    std::vector<std::string> sigs = sc.record;
    if (sigs.empty()) sigs = default_signals(l.bc);
    ResultBundle rb;
    rb.add("full.csv", run_csv(l.bc, full, sigs));
    rb.add("reduced.csv", run_csv(l.bc, red, sigs));
    write_results(rb, out_dir);

    const int ns = std::min(full.n_samples(), red.n_samples());
    const double dev =
        (full.vmag.topRows(ns) - red.vmag.topRows(ns)).cwiseAbs().maxCoeff();
    std::cout << "max |V| deviation full vs reduced: " << dev << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voltage-dynamics simulator and monotonicity analysis toolkit"};
    app.require_subcommand(1);

    std::string case_path, scenario, out_dir = "out", pair, signals, scales = "1,2";
    double at = 0, tol = 1e-9, eps_rel = 1e-6, shed_lo = 1.0, shed_hi = 2.0;
    int bus = 0, sigma_steps = 20;
    bool reduced = false, approx = false;

    auto* sim = app.add_subcommand("simulate", "run a scenario and write CSVs");
    sim->add_option("--case", case_path, "case file")->required();
    sim->add_option("--scenario", scenario, "scenario name")->required();
    sim->add_flag("--reduced", reduced, "integrate the reduced-order model");
    sim->add_option("--out", out_dir, "output directory");

    auto* jac = app.add_subcommand("jacobian", "trajectory Jacobian at a point");
    jac->add_option("--case", case_path)->required();
    jac->add_option("--scenario", scenario, "scenario to integrate first");
    jac->add_option("--at", at, "time along the scenario (0 = equilibrium)");
    jac->add_flag("--approx", approx, "use the approximate voltage sensitivity");
    jac->add_option("--out", out_dir);

    auto* sp = app.add_subcommand("signpattern", "sign pattern and template check");
    sp->add_option("--case", case_path)->required();
    sp->add_option("--scenario", scenario);
    sp->add_option("--at", at);
    sp->add_option("--eps-rel", eps_rel, "relative sign threshold");
    sp->add_option("--out", out_dir);

    auto* mc = app.add_subcommand("monotone-check",
                                  "trajectory ordering between two scenarios");
    mc->add_option("--case", case_path)->required();
    mc->add_option("--scenario-pair", pair, "low,high scenario names")->required();
    mc->add_option("--signals", signals, "comma-separated signal list");
    mc->add_option("--tol", tol, "ordering tolerance");
    mc->add_option("--out", out_dir);

    auto* ls = app.add_subcommand("loadshed-scan",
                                  "homotopy-derivative scan between two sheds");
    ls->add_option("--case", case_path)->required();
    ls->add_option("--bus", bus, "shed bus (file id)")->required();
    ls->add_option("--shed-lo", shed_lo, "smaller reactive shed, p.u.");
    ls->add_option("--shed-hi", shed_hi, "larger reactive shed, p.u.");
    ls->add_option("--sigma-steps", sigma_steps, "homotopy grid intervals");
    ls->add_option("--out", out_dir);

    auto* ld = app.add_subcommand("linear-demo",
                                  "three-state monotone demo system");
    ld->add_option("--scales", scales, "comma-separated input scales");
    ld->add_option("--out", out_dir);

    auto* rd = app.add_subcommand("reduce", "full vs reduced-order comparison");
    rd->add_option("--case", case_path)->required();
    rd->add_option("--scenario", scenario)->required();
    rd->add_option("--out", out_dir);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(case_path, scenario, reduced, out_dir);
        if (jac->parsed()) return cmd_jacobian(case_path, scenario, at, approx, out_dir);
        if (sp->parsed())
            return cmd_signpattern(case_path, scenario, at, eps_rel, out_dir);
        if (mc->parsed())
            return cmd_monotone_check(case_path, pair, signals, tol, out_dir);
        if (ls->parsed())
            return cmd_loadshed_scan(case_path, bus, shed_lo, shed_hi, sigma_steps,
                                     out_dir);
        if (ld->parsed()) return cmd_linear_demo(scales, out_dir);
        if (rd->parsed()) return cmd_reduce(case_path, scenario, out_dir);
    } catch (const vdyn::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vdyn::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vdyn::VdynError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
