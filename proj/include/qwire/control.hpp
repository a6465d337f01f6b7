#ifndef QWIRE_CONTROL_HPP
#define QWIRE_CONTROL_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "qwire/expected.hpp"
#include "qwire/node.hpp"
#include "qwire/photonics.hpp"

// Centralized NC&M controller and the out-of-band DCC message layer:
// label distribution, forwarding-table installation with rollback,
// telemetry ingestion, BER-based quantum-quality inference, supervisory
// probing, and alarms.

namespace qw::control {

using NodeId = node::NodeId;
using LinkId = std::string; // "a->b", directed

enum class MsgKind {
    InstallEntry,
    RemoveEntry,
    TelemetryReport,
    ProbeRequest,
    ProbeResult,
    CounterReport,
    TransportAck, // edge-to-edge ACK/NACK riding the out-of-band channel
    Ack,
};

const char* to_string(MsgKind k);

struct InstallEntryBody {
    std::uint32_t circuit_id = 0;
    node::ForwardingEntry entry;
};
struct RemoveEntryBody {
    int in_port = 0;
    std::uint32_t in_label = 0;
};
struct TelemetryBody {
    LinkId link;
    double ber_sample = 0.0;
    double rx_power_dbm = 0.0;
};
struct ProbeRequestBody {
    LinkId link;
    std::uint32_t circuit_id = 0;
};
struct ProbeResultBody {
    LinkId link;
    double noise_photon_rate_hz = 0.0;
    double rx_power_dbm = 0.0;
};
struct CounterReportBody {
    node::Counters counters;
};
struct AckBody {
    std::uint64_t acked_seq = 0;
};
struct TransportAckBody {
    bool positive = true;
    std::uint32_t circuit_id = 0;
    std::uint64_t payload_id = 0;
    int nack_reason = 0;
};

using MsgBody = std::variant<InstallEntryBody, RemoveEntryBody, TelemetryBody, ProbeRequestBody,
                             ProbeResultBody, CounterReportBody, AckBody, TransportAckBody>;

struct DccMessage {
    MsgKind kind = MsgKind::Ack;
    std::string from;
    std::string to;
    std::uint64_t seq = 0; // per (from,to) direction, strictly increasing
    MsgBody body;
};

// Per-entity DCC endpoint: sequencing, in-order delivery with dedup, and
// at-least-once retransmission bookkeeping. Acks are piggybacked as Ack
// messages (never themselves acked).
class DccEndpoint {
public:
    explicit DccEndpoint(std::string id) : id_(std::move(id)) {}

    const std::string& id() const { return id_; }

    DccMessage stamp(const std::string& to, MsgKind kind, MsgBody body);
    DccMessage make_ack(const std::string& to, std::uint64_t acked_seq) const;

    // Feeds an arriving message; returns the messages now deliverable in
    // seq order (empty for duplicates and out-of-order arrivals).
    std::vector<DccMessage> accept(const DccMessage& msg);

    void on_ack(const std::string& peer, std::uint64_t seq);
    std::vector<DccMessage> unacked() const;
    bool has_unacked() const;

private:
    std::string id_;
    std::map<std::string, std::uint64_t> next_out_;
    std::map<std::string, std::uint64_t> next_in_;
    std::map<std::pair<std::string, std::uint64_t>, DccMessage> outstanding_;
    std::map<std::string, std::map<std::uint64_t, DccMessage>> reorder_;
};

enum class Alarm { ok, degraded, blind_spot_suspected };

const char* to_string(Alarm a);

struct CarBand {
    double lo_db = 0.0;
    double hi_db = 0.0;
    bool open_ended = false; // BER at the measurement floor: no upper bound
};

struct LinkState {
    photonics::LinkMetrics latest;
    std::deque<double> ber_history;
    std::optional<CarBand> inferred;
    std::optional<double> probe_noise_rate_hz;
    Alarm alarm = Alarm::ok;
};

enum class InferError { InsufficientSamples };
enum class InstallError { LabelCollision, UnreachablePath, UnknownNode };

const char* to_string(InstallError e);

struct CircuitPlan {
    std::uint32_t circuit_id = 0;
    std::vector<NodeId> path;
    std::vector<std::pair<NodeId, node::ForwardingEntry>> entries;
};

enum class CircuitStatus { pending, up, failed };

struct CircuitHandle {
    std::uint32_t circuit_id = 0;
    CircuitStatus status = CircuitStatus::pending;
};

struct ControllerConfig {
    photonics::Calibration calibration;
    double launch_dbm = -21.0;
    photonics::HeaderMode header_mode = photonics::HeaderMode::burst;
    photonics::DutyCycle duty;
    std::size_t min_ber_samples = 10;
    std::size_t ber_history_cap = 64;
    double ber_floor = 1e-13;
    double degraded_car_threshold_db = 6.0;
    double blind_spot_noise_threshold_hz = 8e5;
    double band_margin_db = 0.75;
    std::int64_t install_timeout_ns = 500'000'000;
};

struct AlarmEvent {
    std::int64_t time_ns = 0;
    LinkId link;
    Alarm alarm = Alarm::ok;
};

class Controller {
public:
    explicit Controller(ControllerConfig cfg);

    DccEndpoint& dcc() { return dcc_; }

    void add_node(const NodeId& id, bool is_edge);
    // Directed link a->b; port numbers are the data-plane port ids on each end.
    void add_link(const NodeId& a, const NodeId& b, int port_at_a, int port_at_b,
                  const photonics::ChannelState& ch);

    static LinkId link_id(const NodeId& a, const NodeId& b) { return a + "->" + b; }

    // Label distribution: one forwarding entry per hop, collision-checked
    // against the controller's intended tables.
    Expected<CircuitPlan, InstallError> plan_circuit(const std::vector<NodeId>& path,
                                                     std::uint32_t circuit_id);

    // Starts an install; returns the stamped InstallEntry messages to put on
    // the wire. Acks are matched by seq; poll() handles timeout rollback.
    std::vector<DccMessage> begin_install(const CircuitPlan& plan, std::int64_t now_ns);

    // Timeout scan; returns RemoveEntry messages for rolled-back installs.
    std::vector<DccMessage> poll(std::int64_t now_ns);

    // Message-level ack from a node; may complete an install.
    void on_dcc_ack(const std::string& from, std::uint64_t seq);

    void on_telemetry(const TelemetryBody& t, std::int64_t now_ns);
    void on_probe_result(const ProbeResultBody& p, std::int64_t now_ns);

    Expected<CarBand, InferError> infer_quantum_quality(const LinkId& link);

    std::vector<std::pair<LinkId, Alarm>> evaluate_alarms(std::int64_t now_ns);

    CircuitStatus circuit_status(std::uint32_t circuit_id) const;
    const std::map<LinkId, LinkState>& link_states() const { return links_; }
    const std::vector<AlarmEvent>& alarm_log() const { return alarm_log_; }
    const std::vector<LinkId>& link_ids() const { return link_order_; }
    const NodeId& link_src(const LinkId& l) const { return link_ends_.at(l).first; }
    const NodeId& link_dst(const LinkId& l) const { return link_ends_.at(l).second; }

    // Intended forwarding state, for anti-entropy comparison.
    std::vector<node::ForwardingEntry> intended_table(const NodeId& node) const;

    const ControllerConfig& config() const { return cfg_; }

    // Calibrated CAR at a given coexistence attenuation (model inversion target).
    double car_at_attenuation(double attenuation_db) const;

private:
    struct InstallJob {
        CircuitPlan plan;
        std::int64_t deadline_ns = 0;
        std::set<std::pair<std::string, std::uint64_t>> awaiting; // (node, seq)
        std::set<NodeId> acked_nodes;
        CircuitStatus status = CircuitStatus::pending;
    };

    void set_alarm(const LinkId& link, Alarm a, std::int64_t now_ns);

    ControllerConfig cfg_;
    DccEndpoint dcc_;
    std::map<NodeId, bool> nodes_; // id -> is_edge
    std::map<LinkId, photonics::ChannelState> link_channels_;
    std::map<LinkId, std::pair<NodeId, NodeId>> link_ends_;
    std::vector<LinkId> link_order_;
    std::map<NodeId, std::map<NodeId, int>> port_to_; // node -> neighbor -> port
    std::map<LinkId, LinkState> links_;
    std::map<NodeId, std::vector<node::ForwardingEntry>> intended_;
    std::map<std::uint32_t, InstallJob> installs_;
    std::vector<AlarmEvent> alarm_log_;
};

} // namespace qw::control

#endif
