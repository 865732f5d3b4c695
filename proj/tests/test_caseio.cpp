#include <doctest.h>

#include <sstream>

#include "helpers.hpp"

using namespace vdyn;

TEST_CASE("parse/serialize round-trip identity on all bundled cases") {
    for (const char* name : {"smib.case", "case39_sg.case", "case39_gfm.case"}) {
        const CaseFile cf = parse_case_file(helpers::case_path(name));
        const std::string text = serialize_case(cf);
        std::istringstream in(text);
        const CaseFile cf2 = parse_case(in);
        CHECK(cf == cf2);
        // serialization is a fixed point after one round trip
        CHECK(serialize_case(cf2) == text);
    }
}

TEST_CASE("parse errors carry line numbers") {
    auto expect_line = [](const std::string& text, int line) {
        std::istringstream in(text);
        try {
            parse_case(in);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line == line);
        }
    };
    expect_line("nonsense 1\n", 1);
    expect_line("vdyncase 2\n", 1);
    expect_line("vdyncase 1\n[buses]\n0 twenty\n", 3);
    expect_line("vdyncase 1\n[branches]\n0 1 0 0.5\n", 3);
    expect_line("vdyncase 1\n[scenario s]\nevent 1 explode 0\n", 3);
    expect_line("vdyncase 1\nstray 1\n", 2);
    expect_line("vdyncase 1\n[scenario ]\n", 2);
}

TEST_CASE("validation errors name the offending field") {
    CaseFile cf = parse_case_file(helpers::case_path("smib.case"));

    SUBCASE("unknown branch endpoint") {
        cf.branches[0].to = 9;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("branch.to"),
                             ValidationError);
    }
    SUBCASE("duplicate bus id") {
        cf.buses.push_back({0, 20});
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("buses"),
                             ValidationError);
    }
    SUBCASE("device on unknown bus") {
        cf.sgs[0].bus = 5;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("sg.bus"),
                             ValidationError);
    }
    SUBCASE("transient reactance above synchronous") {
        cf.sgs[0].xdp = 2.0;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("sg"),
                             ValidationError);
    }
    SUBCASE("nonpositive dt") {
        cf.scenarios[0].dt = 0.0;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("scenario.dt"),
                             ValidationError);
    }
    SUBCASE("event outside the horizon") {
        cf.scenarios[0].events[0].time = 99.0;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("event.time"),
                             ValidationError);
    }
    SUBCASE("event at unknown bus") {
        cf.scenarios[0].events[0].bus = 42;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("event.bus"),
                             ValidationError);
    }
    SUBCASE("two devices on one bus") {
        CaseGfm g;
        g.bus = 0;
        cf.gfms.push_back(g);
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("devices"),
                             ValidationError);
    }
    SUBCASE("nonpositive frequency") {
        cf.frequency_hz = 0;
        CHECK_THROWS_WITH_AS(build_case(cf), doctest::Contains("frequency_hz"),
                             ValidationError);
    }
}

TEST_CASE("id mapping is dense, ordered, and reversible") {
    const auto bc = helpers::load_case("case39_sg.case");
    REQUIRE(bc.sys.n_bus() == 39);
    for (int i = 0; i < 39; ++i) {
        CHECK(bc.external_ids[i] == i + 1);  // file ids are 1..39
        CHECK(bc.to_internal.at(i + 1) == i);
    }
    CHECK(bc.sys.net.slack == bc.to_internal.at(31));
    CHECK(bc.sys.n_dev() == 10);
}

TEST_CASE("the converter case carries four GFM devices with the stated gains") {
    const auto bc = helpers::load_case("case39_gfm.case");
    int gfms = 0;
    for (int d = 0; d < bc.sys.n_dev(); ++d) {
        if (!bc.sys.is_gfm(d)) continue;
        ++gfms;
        const int file_id = bc.external_ids[bc.sys.device_bus(d)];
        CHECK(file_id >= 30);
        CHECK(file_id <= 33);
        const auto& p = std::get<GfmUnit>(bc.sys.devices[d]).p;
        CHECK(p.k_i == 0.1);
        CHECK(p.k_d == 5.0);
        CHECK(p.t_w == 0.02);
        CHECK(p.k_u == 1.0);
        CHECK(p.x_l == 0.1);
    }
    CHECK(gfms == 4);
    // heavy reactive load sits at file bus 4
    bool found = false;
    for (const auto& ld : bc.sys.loads)
        if (ld.bus == bc.to_internal.at(4)) {
            found = true;
            CHECK(ld.p == 5.0);
            CHECK(ld.q == 4.0);
        }
    CHECK(found);
}

TEST_CASE("scenario lookup and signal-name translation") {
    const auto bc = helpers::load_case("case39_gfm.case");
    const Scenario& sc = bc.scenario("shed_small");
    REQUIRE(sc.events.size() == 1);
    CHECK(sc.events[0].kind == Event::Kind::load_shed);
    CHECK(sc.events[0].bus == bc.to_internal.at(4));
    CHECK(sc.events[0].dq == 1.0);
    CHECK_THROWS_AS(bc.scenario("nope"), ValidationError);

    CHECK(internal_signal_name(bc, "vmag:16") ==
          "vmag:" + std::to_string(bc.to_internal.at(16)));
    CHECK(internal_signal_name(bc, "state:gfm30:e") ==
          "state:gfm" + std::to_string(bc.to_internal.at(30)) + ":e");
    CHECK_THROWS_AS(internal_signal_name(bc, "vmag:99"), ValidationError);
    CHECK_THROWS_AS(internal_signal_name(bc, "oops"), ValidationError);
}

TEST_CASE("fault admittance override survives the round trip") {
    std::string text =
        "vdyncase 1\n[system]\nslack_bus 0\n[buses]\n0 1\n1 1\n"
        "[branches]\n0 1 0 0.5 0\n[loads]\n1 0.5 0.2\n"
        "[sg]\n0 0.5 1.0 1.8 1.7 0.3 8 50 0.05 6 2\n"
        "[scenario f]\nevent 0.1 fault_on 1 0 -2000\nevent 0.2 fault_off 1\n";
    std::istringstream in(text);
    const CaseFile cf = parse_case(in);
    REQUIRE(cf.scenarios.size() == 1);
    CHECK(cf.scenarios[0].events[0].has_admittance);
    const auto bc = build_case(cf);
    CHECK(bc.scenario("f").events[0].y_fault == Complex(0.0, -2000.0));
    std::istringstream in2(serialize_case(cf));
    CHECK(parse_case(in2) == cf);
}
