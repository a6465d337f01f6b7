#ifndef QWIRE_SIM_HPP
#define QWIRE_SIM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "qwire/control.hpp"
#include "qwire/node.hpp"
#include "qwire/photonics.hpp"
#include "qwire/transport.hpp"

// Deterministic discrete-event engine plus scenario configuration, the
// experiment presets, and report/CSV export. Time is integer nanoseconds;
// all randomness flows from the scenario seed; event ties break on
// insertion order.

namespace qw::sim {

using SimTime = std::int64_t; // ns
using Json = nlohmann::ordered_json;

inline constexpr SimTime kUsToNs = 1000;
inline constexpr SimTime kSToNs = 1'000'000'000;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error("config error at '" + field + "': " + what), field(field) {}
    std::string field;
};

class EventQueue {
public:
    void schedule(SimTime t, std::function<void()> fn);
    bool step(); // pops and runs the next event; false when empty
    SimTime now() const { return now_; }
    bool empty() const { return heap_.empty(); }

private:
    struct Item {
        SimTime t;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const {
            return a.t != b.t ? a.t > b.t : a.seq > b.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, Later> heap_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
};

struct NodeSpec {
    std::string id;
    bool is_edge = false;
};

struct LinkSpec {
    std::string a, b;
    photonics::ChannelState channel;
    double dcc_delay_us = 10.0;
};

struct Topology {
    std::vector<NodeSpec> nodes;
    std::vector<LinkSpec> links;
};

struct CircuitSpec {
    std::string src, dst;
    std::uint32_t circuit_id = 0;
    std::uint64_t demand = 0; // client requests to issue
    double rate_hz = 0.0;     // 0 -> one request per duty period
};

struct TransportConfig {
    std::size_t window = 8;
    double timeout_factor = 3.0; // x end-to-end header latency estimate
    int max_retries = 5;
};

struct Scenario {
    std::string name = "custom";
    std::uint64_t seed = 1;
    double duration_s = 5.0;
    photonics::DutyCycle duty;
    double launch_dbm = -21.0;
    photonics::HeaderMode header_mode = photonics::HeaderMode::burst;
    Topology topology;
    std::vector<CircuitSpec> circuits;
    std::vector<double> sweep_attenuations_db;
    std::vector<photonics::HeaderMode> mode_sweep;
    double header_loss_rate = 0.0;
    double dcc_loss_rate = 0.0;
    TransportConfig transport;
    double probe_period_s = 10.0;
    double integration_s = 100.0;
    double telemetry_jitter_sigma = 0.05; // lognormal jitter on measured BER
    bool monte_carlo = false;
    double mc_integration_s = 2.0;
    photonics::CalibrationAnchors anchors;
};

Scenario preset(const std::string& name); // throws ConfigError for unknown names
std::vector<std::string> preset_names();

Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const Scenario& s);

struct SweepRow {
    photonics::HeaderMode mode = photonics::HeaderMode::burst;
    photonics::LinkMetrics metrics;
    std::optional<photonics::CoincidenceStats> monte_carlo;
};

struct CircuitReport {
    std::uint32_t circuit_id = 0;
    std::string src, dst;
    std::uint64_t requests_issued = 0;
    std::uint64_t requests_delivered = 0;
    std::uint64_t requests_gave_up = 0;
    transport::TransportStats stats;
    bool window_bound_ok = true;
    bool duplicate_delivery = false;
    std::optional<photonics::LinkMetrics> last_delivery_metrics;
};

struct LabelHop {
    std::string node;
    std::uint32_t out_label = 0;
};

struct ConservationLedger {
    std::uint64_t ingress_sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;

    bool balanced() const { return ingress_sent == delivered + dropped + in_flight; }
};

struct LinkSample {
    SimTime time_ns = 0;
    double ber = 0.0;
    double rx_dbm = 0.0;
};

struct LinkStateDump {
    double latest_ber = 0.0;
    double rx_power_dbm = 0.0;
    std::optional<control::CarBand> inferred;
    std::optional<double> probe_noise_rate_hz;
    control::Alarm alarm = control::Alarm::ok;
};

struct Report {
    std::string scenario_name;
    std::uint64_t seed = 0;
    SimTime end_time_ns = 0;
    std::vector<SweepRow> sweep;
    std::vector<CircuitReport> circuits;
    std::map<std::string, node::Counters> node_counters;
    std::map<std::string, std::vector<node::ForwardingEntry>> node_tables;
    std::map<control::LinkId, LinkStateDump> link_states;
    std::map<control::LinkId, std::vector<LinkSample>> link_series;
    std::vector<control::AlarmEvent> alarms;
    ConservationLedger ledger;
    std::vector<std::string> audit_violations;
    bool tables_converged = true;
    std::vector<std::vector<LabelHop>> delivered_label_traces;
};

Report run(const Scenario& s);

Json report_to_json(const Report& r);
Json alarms_to_json(const Report& r);
std::string metrics_csv(const Report& r);

// Writes metrics.csv, report.json, alarms.json into dir (created if needed).
void export_report(const Report& r, const std::string& dir);

// Post-run invariant checks backing `qwire run --check`; returns messages
// for every violated invariant.
std::vector<std::string> check_report(const Report& r);

Json calibration_to_json(const photonics::Calibration& cal);
photonics::CalibrationAnchors anchors_from_json(const Json& j);

} // namespace qw::sim

#endif
