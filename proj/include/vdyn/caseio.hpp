#pragma once

// Line-oriented case-file format: parsing, serialization with value-identity
// round trips, validation with field-named errors, and construction of a
// PowerSystem (plus internally-indexed scenarios) from a parsed case.
//
// Format sketch ('#' starts a comment, sections in brackets):
//
//   vdyncase 1
//   [system]
//   base_mva 100
//   frequency_hz 60
//   slack_bus 31
//   [buses]            # id base_kv
//   [branches]         # from to r x b
//   [loads]            # bus p q          (p.u. consumption)
//   [sg]               # bus pgen vset xd xq xdp td0 ka ta h d
//   [gfm]              # bus pgen vset xl ki kd tw ku kq hvir dvir
//   [scenario NAME]
//   t_end 5
//   dt 0.001
//   jacobian_stride 10
//   record vmag:16 state:sg30:e
//   event 0.1 fault_on 16
//   event 0.25 fault_off 16
//   event 1 vref_step 30 0.05
//   event 1 qref_step 30 0.05
//   event 0 load_shed 4 0 1.5
//
// Bus ids in the file are arbitrary unique integers; build_case maps them
// to dense internal indices in ascending id order.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vdyn/simulator.hpp"

namespace vdyn {

struct CaseBus {
    int id = 0;
    double base_kv = 0;
    bool operator==(const CaseBus&) const = default;
};

struct CaseBranch {
    int from = 0, to = 0;
    double r = 0, x = 0, b = 0;
    bool operator==(const CaseBranch&) const = default;
};

struct CaseLoad {
    int bus = 0;
    double p = 0, q = 0;
    bool operator==(const CaseLoad&) const = default;
};

struct CaseSg {
    int bus = 0;
    double pgen = 0, vset = 1;
    double xd = 1.8, xq = 1.7, xdp = 0.3, td0 = 8;
    double ka = 50, ta = 0.05, h = 6, d = 2;
    bool operator==(const CaseSg&) const = default;
};

struct CaseGfm {
    int bus = 0;
    double pgen = 0, vset = 1;
    double xl = 0.1, ki = 0.1, kd = 5, tw = 0.02;
    double ku = 1, kq = 0.1, hvir = 5, dvir = 0;
    bool operator==(const CaseGfm&) const = default;
};

struct CaseEvent {
    double time = 0;
    std::string kind;  // fault_on | fault_off | vref_step | qref_step | load_shed
    int bus = -1;
    double a = 0, b = 0;  // step size / shed dp,dq / fault admittance re,im
    bool has_admittance = false;
    bool operator==(const CaseEvent&) const = default;
};

struct CaseScenario {
    std::string name;
    double t_end = 5.0;
    double dt = 1e-3;
    int jacobian_stride = 10;
    std::vector<std::string> record;
    std::vector<CaseEvent> events;
    bool operator==(const CaseScenario&) const = default;
};

struct CaseFile {
    int version = 1;
    double base_mva = 100;
    double frequency_hz = 60;
    int slack_bus = -1;  // external id
    std::vector<CaseBus> buses;
    std::vector<CaseBranch> branches;
    std::vector<CaseLoad> loads;    // constant-power, enter the injections
    std::vector<CaseLoad> zloads;   // constant-impedance, folded into Y
    std::vector<CaseSg> sgs;
    std::vector<CaseGfm> gfms;
    std::vector<CaseScenario> scenarios;
    bool operator==(const CaseFile&) const = default;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> case_tokens(const std::string& raw) {
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos)
        line.erase(hash);
    std::istringstream is(line);
    std::vector<std::string> toks;
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

inline double case_num(const std::string& tok, int line, const char* what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw ParseError(line, std::string("expected a number for ") + what +
                                   ", got '" + tok + "'");
    }
    if (used != tok.size())
        throw ParseError(line, std::string("trailing characters in ") + what +
                                   ": '" + tok + "'");
    return v;
}

inline int case_int(const std::string& tok, int line, const char* what) {
    const double v = case_num(tok, line, what);
    const int i = static_cast<int>(std::llround(v));
    if (double(i) != v)
        throw ParseError(line, std::string(what) + " must be an integer");
    return i;
}

inline void case_arity(const std::vector<std::string>& toks, std::size_t want,
                       int line, const char* what) {
    if (toks.size() != want)
        throw ParseError(line, std::string("expected ") + std::to_string(want - 1) +
                                   " fields for " + what);
}

}  // namespace detail

inline CaseFile parse_case(std::istream& in) {
    CaseFile cf;
    std::string section;
    CaseScenario* scen = nullptr;
    std::string raw;
    int ln = 0;
    bool header_seen = false;

    while (std::getline(in, raw)) {
        ++ln;
        auto toks = detail::case_tokens(raw);
        if (toks.empty()) continue;

        if (!header_seen) {
            if (toks.size() != 2 || toks[0] != "vdyncase")
                throw ParseError(ln, "file must start with 'vdyncase <version>'");
            cf.version = detail::case_int(toks[1], ln, "version");
            if (cf.version != 1) throw ParseError(ln, "unsupported case version");
            header_seen = true;
            continue;
        }

        if (toks[0].front() == '[') {
            std::string joined = toks[0];
            for (std::size_t i = 1; i < toks.size(); ++i) joined += " " + toks[i];
            if (joined.back() != ']')
                throw ParseError(ln, "malformed section header");
            section = joined.substr(1, joined.size() - 2);
            scen = nullptr;
            if (section.rfind("scenario ", 0) == 0) {
                cf.scenarios.emplace_back();
                scen = &cf.scenarios.back();
                scen->name = section.substr(9);
                if (scen->name.empty())
                    throw ParseError(ln, "scenario section needs a name");
                section = "scenario";
            }
            continue;
        }

        if (section == "system") {
            detail::case_arity(toks, 2, ln, toks[0].c_str());
            if (toks[0] == "base_mva") cf.base_mva = detail::case_num(toks[1], ln, "base_mva");
            else if (toks[0] == "frequency_hz")
                cf.frequency_hz = detail::case_num(toks[1], ln, "frequency_hz");
            else if (toks[0] == "slack_bus")
                cf.slack_bus = detail::case_int(toks[1], ln, "slack_bus");
            else
                throw ParseError(ln, "unknown [system] key '" + toks[0] + "'");
        } else if (section == "buses") {
            detail::case_arity(toks, 2, ln, "a bus (id base_kv)");
            cf.buses.push_back({detail::case_int(toks[0], ln, "bus id"),
                                detail::case_num(toks[1], ln, "base_kv")});
        } else if (section == "branches") {
            detail::case_arity(toks, 5, ln, "a branch (from to r x b)");
            cf.branches.push_back({detail::case_int(toks[0], ln, "from"),
                                   detail::case_int(toks[1], ln, "to"),
                                   detail::case_num(toks[2], ln, "r"),
                                   detail::case_num(toks[3], ln, "x"),
                                   detail::case_num(toks[4], ln, "b")});
        } else if (section == "loads" || section == "zloads") {
            detail::case_arity(toks, 3, ln, "a load (bus p q)");
            auto& dst = section == "loads" ? cf.loads : cf.zloads;
            dst.push_back({detail::case_int(toks[0], ln, "bus"),
                           detail::case_num(toks[1], ln, "p"),
                           detail::case_num(toks[2], ln, "q")});
        } else if (section == "sg") {
            detail::case_arity(toks, 11, ln,
                               "an sg (bus pgen vset xd xq xdp td0 ka ta h d)");
            CaseSg g;
            g.bus = detail::case_int(toks[0], ln, "bus");
            g.pgen = detail::case_num(toks[1], ln, "pgen");
            g.vset = detail::case_num(toks[2], ln, "vset");
            g.xd = detail::case_num(toks[3], ln, "xd");
            g.xq = detail::case_num(toks[4], ln, "xq");
            g.xdp = detail::case_num(toks[5], ln, "xdp");
            g.td0 = detail::case_num(toks[6], ln, "td0");
            g.ka = detail::case_num(toks[7], ln, "ka");
            g.ta = detail::case_num(toks[8], ln, "ta");
            g.h = detail::case_num(toks[9], ln, "h");
            g.d = detail::case_num(toks[10], ln, "d");
            cf.sgs.push_back(g);
        } else if (section == "gfm") {
            detail::case_arity(toks, 11, ln,
                               "a gfm (bus pgen vset xl ki kd tw ku kq hvir dvir)");
            CaseGfm g;
            g.bus = detail::case_int(toks[0], ln, "bus");
            g.pgen = detail::case_num(toks[1], ln, "pgen");
            g.vset = detail::case_num(toks[2], ln, "vset");
            g.xl = detail::case_num(toks[3], ln, "xl");
            g.ki = detail::case_num(toks[4], ln, "ki");
            g.kd = detail::case_num(toks[5], ln, "kd");
            g.tw = detail::case_num(toks[6], ln, "tw");
            g.ku = detail::case_num(toks[7], ln, "ku");
            g.kq = detail::case_num(toks[8], ln, "kq");
            g.hvir = detail::case_num(toks[9], ln, "hvir");
            g.dvir = detail::case_num(toks[10], ln, "dvir");
            cf.gfms.push_back(g);
        } else if (section == "scenario") {
            if (toks[0] == "t_end") {
                detail::case_arity(toks, 2, ln, "t_end");
                scen->t_end = detail::case_num(toks[1], ln, "t_end");
            } else if (toks[0] == "dt") {
                detail::case_arity(toks, 2, ln, "dt");
                scen->dt = detail::case_num(toks[1], ln, "dt");
            } else if (toks[0] == "jacobian_stride") {
                detail::case_arity(toks, 2, ln, "jacobian_stride");
                scen->jacobian_stride = detail::case_int(toks[1], ln, "jacobian_stride");
            } else if (toks[0] == "record") {
                scen->record.assign(toks.begin() + 1, toks.end());
            } else if (toks[0] == "event") {
                if (toks.size() < 4) throw ParseError(ln, "truncated event line");
                CaseEvent ev;
                ev.time = detail::case_num(toks[1], ln, "event time");
                ev.kind = toks[2];
                ev.bus = detail::case_int(toks[3], ln, "event bus");
                if (ev.kind == "fault_on") {
                    if (toks.size() == 6) {
                        ev.a = detail::case_num(toks[4], ln, "fault conductance");
                        ev.b = detail::case_num(toks[5], ln, "fault susceptance");
                        ev.has_admittance = true;
                    } else {
                        detail::case_arity(toks, 4, ln, "fault_on");
                    }
                } else if (ev.kind == "fault_off") {
                    detail::case_arity(toks, 4, ln, "fault_off");
                } else if (ev.kind == "vref_step" || ev.kind == "qref_step") {
                    detail::case_arity(toks, 5, ln, ev.kind.c_str());
                    ev.a = detail::case_num(toks[4], ln, "step size");
                } else if (ev.kind == "load_shed") {
                    detail::case_arity(toks, 6, ln, "load_shed");
                    ev.a = detail::case_num(toks[4], ln, "shed p");
                    ev.b = detail::case_num(toks[5], ln, "shed q");
                } else {
                    throw ParseError(ln, "unknown event kind '" + ev.kind + "'");
                }
                scen->events.push_back(ev);
            } else {
                throw ParseError(ln, "unknown scenario key '" + toks[0] + "'");
            }
        } else {
            throw ParseError(ln, "content outside of a recognized section");
        }
    }
    if (!header_seen) throw ParseError(1, "empty case file");
    return cf;
}

inline CaseFile parse_case_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw VdynError("cannot open case file: " + path);
    return parse_case(in);
}

// ---------------------------------------------------------------------------
// Serialization (shortest round-trippable doubles)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string case_fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof probe, "%.*g", prec, v);
        if (std::stod(probe) == v) return probe;
    }
    return buf;
}

}  // namespace detail

inline std::string serialize_case(const CaseFile& cf) {
    std::ostringstream os;
    auto n = detail::case_fmt;
    os << "vdyncase " << cf.version << "\n\n[system]\n";
    os << "base_mva " << n(cf.base_mva) << "\n";
    os << "frequency_hz " << n(cf.frequency_hz) << "\n";
    if (cf.slack_bus >= 0) os << "slack_bus " << cf.slack_bus << "\n";
    os << "\n[buses]\n";
    for (const auto& b : cf.buses) os << b.id << " " << n(b.base_kv) << "\n";
    os << "\n[branches]\n";
    for (const auto& b : cf.branches)
        os << b.from << " " << b.to << " " << n(b.r) << " " << n(b.x) << " "
           << n(b.b) << "\n";
    os << "\n[loads]\n";
    for (const auto& l : cf.loads)
        os << l.bus << " " << n(l.p) << " " << n(l.q) << "\n";
    if (!cf.zloads.empty()) {
        os << "\n[zloads]\n";
        for (const auto& l : cf.zloads)
            os << l.bus << " " << n(l.p) << " " << n(l.q) << "\n";
    }
    if (!cf.sgs.empty()) {
        os << "\n[sg]\n";
        for (const auto& g : cf.sgs)
            os << g.bus << " " << n(g.pgen) << " " << n(g.vset) << " " << n(g.xd)
               << " " << n(g.xq) << " " << n(g.xdp) << " " << n(g.td0) << " "
               << n(g.ka) << " " << n(g.ta) << " " << n(g.h) << " " << n(g.d)
               << "\n";
    }
    if (!cf.gfms.empty()) {
        os << "\n[gfm]\n";
        for (const auto& g : cf.gfms)
            os << g.bus << " " << n(g.pgen) << " " << n(g.vset) << " " << n(g.xl)
               << " " << n(g.ki) << " " << n(g.kd) << " " << n(g.tw) << " "
               << n(g.ku) << " " << n(g.kq) << " " << n(g.hvir) << " "
               << n(g.dvir) << "\n";
    }
    for (const auto& sc : cf.scenarios) {
        os << "\n[scenario " << sc.name << "]\n";
        os << "t_end " << n(sc.t_end) << "\n";
        os << "dt " << n(sc.dt) << "\n";
        os << "jacobian_stride " << sc.jacobian_stride << "\n";
        if (!sc.record.empty()) {
            os << "record";
            for (const auto& r : sc.record) os << " " << r;
            os << "\n";
        }
        for (const auto& ev : sc.events) {
            os << "event " << n(ev.time) << " " << ev.kind << " " << ev.bus;
            if (ev.kind == "vref_step" || ev.kind == "qref_step")
                os << " " << n(ev.a);
            else if (ev.kind == "load_shed")
                os << " " << n(ev.a) << " " << n(ev.b);
            else if (ev.kind == "fault_on" && ev.has_admittance)
                os << " " << n(ev.a) << " " << n(ev.b);
            os << "\n";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Building a PowerSystem
// ---------------------------------------------------------------------------

struct BuiltCase {
    PowerSystem sys;
    std::vector<int> external_ids;   // internal index -> file id
    std::map<int, int> to_internal;  // file id -> internal index
    std::vector<Scenario> scenarios;

    const Scenario& scenario(const std::string& name) const {
        for (const auto& sc : scenarios)
            if (sc.name == name) return sc;
        throw ValidationError("scenario", "no scenario named '" + name + "'");
    }
};

inline BuiltCase build_case(const CaseFile& cf) {
    if (cf.buses.empty()) throw ValidationError("buses", "case has no buses");
    if (cf.frequency_hz <= 0)
        throw ValidationError("frequency_hz", "must be positive");
    if (cf.base_mva <= 0) throw ValidationError("base_mva", "must be positive");

    BuiltCase out;
    std::vector<CaseBus> sorted = cf.buses;
    std::sort(sorted.begin(), sorted.end(),
              [](const CaseBus& a, const CaseBus& b) { return a.id < b.id; });
    for (const auto& b : sorted) {
        if (out.to_internal.count(b.id))
            throw ValidationError("buses", "duplicate bus id " +
                                               std::to_string(b.id));
        out.to_internal[b.id] = static_cast<int>(out.external_ids.size());
        out.external_ids.push_back(b.id);
    }
    auto internal = [&](int id, const char* field) {
        const auto it = out.to_internal.find(id);
        if (it == out.to_internal.end())
            throw ValidationError(field, "references unknown bus " +
                                             std::to_string(id));
        return it->second;
    };

    const int n = static_cast<int>(sorted.size());
    std::vector<Bus> buses(n);
    for (int i = 0; i < n; ++i)
        buses[i] = {i, sorted[i].base_kv, BusKind::load};
    for (const auto& g : cf.sgs) buses[internal(g.bus, "sg.bus")].kind = BusKind::device;
    for (const auto& g : cf.gfms)
        buses[internal(g.bus, "gfm.bus")].kind = BusKind::device;
    if (cf.slack_bus >= 0)
        buses[internal(cf.slack_bus, "slack_bus")].kind = BusKind::slack;

    std::vector<Branch> branches;
    for (const auto& b : cf.branches) {
        if (b.x == 0 && b.r == 0)
            throw ValidationError("branches", "zero impedance " +
                                                  std::to_string(b.from) + "-" +
                                                  std::to_string(b.to));
        branches.push_back({internal(b.from, "branch.from"),
                            internal(b.to, "branch.to"), b.r, b.x, b.b});
    }

    // constant-impedance loads: admittance y = p - jq consumes p + jq at
    // unit voltage
    VecC shunts = VecC::Zero(n);
    for (const auto& l : cf.zloads)
        shunts(internal(l.bus, "zload.bus")) += Complex(l.p, -l.q);

    PowerSystem sys;
    sys.net = build_admittance(std::move(buses), std::move(branches), shunts);
    sys.omega_s = 2.0 * M_PI * cf.frequency_hz;
    for (const auto& l : cf.loads)
        sys.loads.push_back({internal(l.bus, "load.bus"), l.p, l.q});

    struct DevRow {
        int bus;
        Device dev;
    };
    std::vector<DevRow> rows;
    for (const auto& g : cf.sgs) {
        if (g.xd <= 0 || g.xq <= 0 || g.xdp <= 0)
            throw ValidationError("sg", "reactances must be positive at bus " +
                                            std::to_string(g.bus));
        if (g.td0 <= 0 || g.ta <= 0 || g.ka <= 0 || g.h <= 0)
            throw ValidationError("sg", "td0/ta/ka/h must be positive at bus " +
                                            std::to_string(g.bus));
        if (g.xdp >= g.xd)
            throw ValidationError("sg", "xdp must be below xd at bus " +
                                            std::to_string(g.bus));
        SgUnit u;
        u.bus = internal(g.bus, "sg.bus");
        u.pf_p = g.pgen;
        u.pf_vset = g.vset;
        u.p.x_d = g.xd;
        u.p.x_q = g.xq;
        u.p.x_dp = g.xdp;
        u.p.t_d0p = g.td0;
        u.p.k_a = g.ka;
        u.p.t_a = g.ta;
        u.p.h = g.h;
        u.p.d = g.d;
        rows.push_back({u.bus, u});
    }
    for (const auto& g : cf.gfms) {
        if (g.xl <= 0)
            throw ValidationError("gfm", "xl must be positive at bus " +
                                             std::to_string(g.bus));
        if (g.ki <= 0 || g.tw <= 0 || g.ku <= 0 || g.kq <= 0 || g.hvir <= 0)
            throw ValidationError("gfm",
                                  "ki/tw/ku/kq/hvir must be positive at bus " +
                                      std::to_string(g.bus));
        GfmUnit u;
        u.bus = internal(g.bus, "gfm.bus");
        u.pf_p = g.pgen;
        u.pf_vset = g.vset;
        u.p.x_l = g.xl;
        u.p.k_i = g.ki;
        u.p.k_d = g.kd;
        u.p.t_w = g.tw;
        u.p.k_u = g.ku;
        u.p.k_q = g.kq;
        u.p.h_vir = g.hvir;
        u.p.d_vir = g.dvir;
        rows.push_back({u.bus, u});
    }
    std::sort(rows.begin(), rows.end(),
              [](const DevRow& a, const DevRow& b) { return a.bus < b.bus; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].bus == rows[i - 1].bus)
            throw ValidationError("devices", "two devices share bus " +
                                                 std::to_string(
                                                     out.external_ids[rows[i].bus]));
    for (auto& r : rows) sys.devices.push_back(std::move(r.dev));
    out.sys = std::move(sys);

    for (const auto& csc : cf.scenarios) {
        if (csc.dt <= 0)
            throw ValidationError("scenario.dt", "must be positive in '" +
                                                     csc.name + "'");
        if (csc.t_end <= 0)
            throw ValidationError("scenario.t_end", "must be positive in '" +
                                                        csc.name + "'");
        if (csc.jacobian_stride < 0)
            throw ValidationError("scenario.jacobian_stride",
                                  "must be nonnegative in '" + csc.name + "'");
        Scenario sc;
        sc.name = csc.name;
        sc.t_end = csc.t_end;
        sc.dt = csc.dt;
        sc.jacobian_stride = csc.jacobian_stride;
        sc.record = csc.record;
        for (const auto& cev : csc.events) {
            if (cev.time < 0 || cev.time > csc.t_end)
                throw ValidationError("event.time",
                                      "outside [0, t_end] in '" + csc.name + "'");
            Event ev;
            ev.time = cev.time;
            ev.bus = internal(cev.bus, "event.bus");
            if (cev.kind == "fault_on") {
                ev.kind = Event::Kind::fault_on;
                if (cev.has_admittance) ev.y_fault = Complex(cev.a, cev.b);
            } else if (cev.kind == "fault_off") {
                ev.kind = Event::Kind::fault_off;
            } else if (cev.kind == "vref_step") {
                ev.kind = Event::Kind::vref_step;
                ev.dv = cev.a;
            } else if (cev.kind == "qref_step") {
                ev.kind = Event::Kind::qref_step;
                ev.dv = cev.a;
            } else if (cev.kind == "load_shed") {
                ev.kind = Event::Kind::load_shed;
                ev.dp = cev.a;
                ev.dq = cev.b;
            } else {
                throw ValidationError("event.kind", "unknown kind '" + cev.kind + "'");
            }
            sc.events.push_back(ev);
        }
        out.scenarios.push_back(std::move(sc));
    }
    return out;
}

/// Translates a signal name written with file bus ids ("vmag:16",
/// "state:sg30:e") to the internal indexing used by signal extraction.
inline std::string internal_signal_name(const BuiltCase& bc, const std::string& sig) {
    auto internal = [&](const std::string& id_str) {
        const auto it = bc.to_internal.find(std::stoi(id_str));
        if (it == bc.to_internal.end())
            throw ValidationError("record", "signal references unknown bus " + id_str);
        return std::to_string(it->second);
    };
    const auto colon = sig.find(':');
    if (colon == std::string::npos)
        throw ValidationError("record", "malformed signal '" + sig + "'");
    const std::string kind = sig.substr(0, colon);
    const std::string rest = sig.substr(colon + 1);
    if (kind == "vmag" || kind == "vang" || kind == "pe" || kind == "qc")
        return kind + ":" + internal(rest);
    if (kind == "state") {
        // rest is "<sg|gfm><file id>:<component>"
        const auto c2 = rest.find(':');
        if (c2 == std::string::npos)
            throw ValidationError("record", "malformed state signal '" + sig + "'");
        const std::string tag = rest.substr(0, c2);
        const std::size_t digits = tag.find_first_of("0123456789");
        if (digits == std::string::npos)
            throw ValidationError("record", "malformed state signal '" + sig + "'");
        return "state:" + tag.substr(0, digits) + internal(tag.substr(digits)) +
               ":" + rest.substr(c2 + 1);
    }
    throw ValidationError("record", "unknown signal kind '" + kind + "'");
}

}  // namespace vdyn
