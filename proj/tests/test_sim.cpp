#include "doctest.h"

#include <fstream>
#include <vector>

#include "qwire/sim.hpp"

using namespace qw;
using namespace qw::sim;

namespace {

// Minimal JSON-Schema validator covering the subset the report schema uses:
// type, properties, required, items.
void validate_schema(const Json& schema, const Json& value, const std::string& where,
                     std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const std::string t = schema["type"];
        const bool ok = (t == "object" && value.is_object()) ||
                        (t == "array" && value.is_array()) ||
                        (t == "string" && value.is_string()) ||
                        (t == "boolean" && value.is_boolean()) ||
                        (t == "integer" && value.is_number_integer()) ||
                        (t == "number" && value.is_number());
        if (!ok) {
            errors.push_back(where + ": expected " + t);
            return;
        }
    }
    if (schema.contains("required"))
        for (const auto& key : schema["required"])
            if (!value.contains(key.get<std::string>()))
                errors.push_back(where + ": missing '" + key.get<std::string>() + "'");
    if (schema.contains("properties"))
        for (const auto& [key, sub] : schema["properties"].items())
            if (value.contains(key))
                validate_schema(sub, value[key], where + "." + key, errors);
    if (schema.contains("items") && value.is_array())
        for (std::size_t i = 0; i < value.size(); ++i)
            validate_schema(schema["items"], value[i], where + "[" + std::to_string(i) + "]",
                            errors);
}

Scenario lossy_scenario() {
    Scenario s = preset("multihop");
    s.name = "lossy";
    s.header_loss_rate = 0.1;
    s.duration_s = 10.0;
    s.seed = 7;
    auto& c = s.circuits.at(0);
    c.demand = 200;
    return s;
}

} // namespace

TEST_CASE("event queue orders by time, breaks ties by insertion") {
    EventQueue q;
    std::vector<int> order;
    q.schedule(20, [&] { order.push_back(3); });
    q.schedule(10, [&] { order.push_back(1); });
    q.schedule(10, [&] { order.push_back(2); });
    while (q.step()) {
    }
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(q.now() == 20);
    CHECK(q.empty());
}

TEST_CASE("events may not be scheduled in the past") {
    EventQueue q;
    bool threw = false;
    q.schedule(100, [&] {
        try {
            q.schedule(50, [] {});
        } catch (const std::logic_error&) {
            threw = true;
        }
    });
    while (q.step()) {
    }
    CHECK(threw);
}

TEST_CASE("handlers can schedule follow-up events at the current time") {
    EventQueue q;
    int fired = 0;
    q.schedule(5, [&] { q.schedule(5, [&] { ++fired; }); });
    while (q.step()) {
    }
    CHECK(fired == 1);
}

TEST_CASE("presets construct and carry the documented parameters") {
    for (const auto& name : preset_names())
        CHECK_NOTHROW(preset(name));
    CHECK(preset("fig5_sweep").launch_dbm == -28.0);
    CHECK(preset("fig3_modes").duty.header_us == 102.4);
    CHECK(preset("fig3_modes").mode_sweep.size() == 3);
    CHECK(preset("fig4_burst_5km").topology.links.at(0).channel.length_km == 5.0);
    CHECK(preset("blindspot").topology.links.at(0).channel.injected_noise_rate_per_ns ==
          doctest::Approx(1e-2));
    CHECK(preset("multihop").topology.nodes.size() == 5);
    CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("scenario JSON round-trips exactly") {
    for (const auto& name : preset_names()) {
        const Scenario s = preset(name);
        const Json j = scenario_to_json(s);
        const Scenario back = scenario_from_json(j);
        CHECK(scenario_to_json(back).dump() == j.dump());
    }
}

TEST_CASE("scenario validation pinpoints the offending field") {
    const auto field_of = [](Json j) -> std::string {
        try {
            scenario_from_json(j);
        } catch (const ConfigError& e) {
            return e.field;
        }
        return "";
    };
    Json base = scenario_to_json(preset("multihop"));

    Json j = base;
    j["duty"]["period_us"] = 10.0;
    CHECK(field_of(j) == "duty.period_us");

    j = base;
    j["topology"]["nodes"].push_back({{"id", "e1"}, {"kind", "edge"}});
    CHECK(field_of(j) == "topology.nodes");

    j = base;
    j["topology"]["links"][0]["a"] = "ghost";
    CHECK(field_of(j) == "topology.links");

    j = base;
    j["circuits"][0]["src"] = "c1"; // core node as endpoint
    CHECK(field_of(j) == "circuits.src");

    j = base;
    j["circuits"][0]["circuit_id"] = (1 << 20);
    CHECK(field_of(j) == "circuits.circuit_id");

    j = base;
    j["header_loss_rate"] = 1.5;
    CHECK(field_of(j) == "header_loss_rate");

    j = base;
    j["transport"]["window"] = 0;
    CHECK(field_of(j) == "transport.window");

    j = base;
    j["header_mode"] = "sideways";
    CHECK(field_of(j) == "header_mode");
}

TEST_CASE("equal seeds give byte-identical reports; different seeds differ") {
    const Scenario s = lossy_scenario();
    const std::string a = report_to_json(run(s)).dump();
    const std::string b = report_to_json(run(s)).dump();
    CHECK(a == b);

    Scenario s2 = s;
    s2.seed = 8;
    const std::string c = report_to_json(run(s2)).dump();
    CHECK(a != c);
}

TEST_CASE("a scenario with no demand still runs and balances") {
    Scenario s = preset("fig3_modes");
    const Report r = run(s);
    CHECK(r.ledger.ingress_sent == 0);
    CHECK(r.ledger.balanced());
    CHECK(r.sweep.size() == 3);
    CHECK(r.circuits.empty());
}

TEST_CASE("the lossy run keeps all cross-checked invariants") {
    const Report r = run(lossy_scenario());
    CHECK(check_report(r).empty());
    CHECK(r.ledger.balanced());
    CHECK(r.ledger.dropped > 0); // losses actually happened
    CHECK(r.tables_converged);
    CHECK(r.audit_violations.empty());
    // drops counted by nodes reconcile with the ledger
    std::uint64_t node_drops = 0;
    for (const auto& [id, c] : r.node_counters)
        node_drops += c.dropped_total();
    CHECK(node_drops == r.ledger.dropped);
}

TEST_CASE("check_report flags broken invariants") {
    Report r = run(lossy_scenario());
    REQUIRE(check_report(r).empty());
    SUBCASE("unbalanced ledger") {
        ++r.ledger.dropped;
        CHECK_FALSE(check_report(r).empty());
    }
    SUBCASE("audit violation") {
        r.audit_violations.push_back("x");
        CHECK_FALSE(check_report(r).empty());
    }
    SUBCASE("diverged tables") {
        r.tables_converged = false;
        CHECK_FALSE(check_report(r).empty());
    }
    SUBCASE("non-monotone sweep") {
        Report f3 = run(preset("fig3_modes"));
        REQUIRE(check_report(f3).empty());
        REQUIRE(f3.sweep.size() == 3);
        f3.sweep[1].mode = f3.sweep[0].mode; // same mode, CAR jumps around
        f3.sweep[1].metrics.stats.car_db = f3.sweep[0].metrics.stats.car_db + 5.0;
        CHECK_FALSE(check_report(f3).empty());
    }
}

TEST_CASE("metrics CSV carries the sweep with a fixed header line") {
    const Report r = run(preset("fig5_sweep"));
    const std::string csv = metrics_csv(r);
    CHECK(csv.rfind("attenuation_db,rx_dbm,ber,cc,ac,car_db,mode\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n')
            ++lines;
    CHECK(lines == 1 + r.sweep.size());
}

TEST_CASE("report JSON conforms to the shipped schema") {
    std::ifstream f(std::string(QWIRE_SOURCE_DIR) + "/schema/report.schema.json");
    REQUIRE(f.good());
    const Json schema = Json::parse(f);
    for (const auto& name : {"fig3_modes", "multihop", "blindspot"}) {
        const Json j = report_to_json(run(preset(name)));
        std::vector<std::string> errors;
        validate_schema(schema, j, std::string("report(") + name + ")", errors);
        for (const auto& e : errors)
            FAIL_CHECK(e);
        CHECK(errors.empty());
    }
}

TEST_CASE("export writes the three artifacts") {
    const Report r = run(preset("fig4_burst_5km"));
    const std::string dir = "export_test_out";
    export_report(r, dir);
    for (const char* f : {"/metrics.csv", "/report.json", "/alarms.json"}) {
        std::ifstream in(dir + f);
        CHECK(in.good());
    }
    std::ifstream rep(dir + "/report.json");
    CHECK_NOTHROW(Json::parse(rep));
}

TEST_CASE("the shipped calibration fixture matches a fresh fit") {
    std::ifstream f(std::string(QWIRE_SOURCE_DIR) + "/data/calibration.json");
    REQUIRE(f.good());
    const Json shipped = Json::parse(f);
    const Json fresh = calibration_to_json(photonics::calibrated_defaults());
    CHECK(shipped.dump(2) == fresh.dump(2));
}

TEST_CASE("calibration JSON surfaces the fitted parameters and anchors") {
    const Json j = calibration_to_json(photonics::calibrated_defaults());
    CHECK(j["anchors"]["car_none_db"] == 16.0);
    CHECK(j["source"]["pair_rate_hz"].get<double>() > 0.0);
    CHECK(j["detector"]["efficiency"].get<double>() > 0.0);
    const auto a = anchors_from_json(j["anchors"]);
    CHECK(a.car_burst_db == 12.6);
}
