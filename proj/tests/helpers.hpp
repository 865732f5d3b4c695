#pragma once

#include <string>

#include "vdyn/vdyn.hpp"

namespace helpers {

inline std::string case_path(const std::string& name) {
    return std::string(VDYN_CASES_DIR) + "/" + name;
}

inline vdyn::BuiltCase load_case(const std::string& name) {
    return vdyn::build_case(vdyn::parse_case_file(case_path(name)));
}

/// Small all-code 2-bus system: one SG at bus 0 (slack) feeding a
/// constant-power load at bus 1 over a reactive line.
inline vdyn::PowerSystem make_smib() {
    using namespace vdyn;
    std::vector<Bus> buses = {{0, 20, BusKind::slack}, {1, 20, BusKind::load}};
    std::vector<Branch> branches = {{0, 1, 0.0, 0.5, 0.0}};
    PowerSystem sys;
    sys.net = build_admittance(buses, branches, {});
    SgUnit sg;
    sg.bus = 0;
    sg.pf_p = 0.5;
    sg.pf_vset = 1.0;
    sys.devices.push_back(sg);
    sys.loads.push_back({1, 0.5, 0.2});
    return sys;
}

/// 2-bus GFM vs constant-power load system.
inline vdyn::PowerSystem make_gfm_pair() {
    using namespace vdyn;
    std::vector<Bus> buses = {{0, 20, BusKind::slack}, {1, 20, BusKind::load}};
    std::vector<Branch> branches = {{0, 1, 0.0, 0.4, 0.0}};
    PowerSystem sys;
    sys.net = build_admittance(buses, branches, {});
    GfmUnit g;
    g.bus = 0;
    g.pf_p = 0.4;
    g.pf_vset = 1.0;
    sys.devices.push_back(g);
    sys.loads.push_back({1, 0.4, 0.15});
    return sys;
}

}  // namespace helpers
