#ifndef QWIRE_NODE_HPP
#define QWIRE_NODE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "qwire/codec.hpp"
#include "qwire/expected.hpp"
#include "qwire/photonics.hpp"

// Quantum Wrapper node state machines. Core nodes unwrap the header, look
// up the label, swap it, and forward; the payload descriptor passes through
// as an opaque sealed handle and is only ever opened at the egress edge.

namespace qw::node {

using PayloadId = std::uint64_t;
using NodeId = std::string;
using SimTimeNs = std::int64_t;

inline constexpr int kLocalPort = 0; // client-facing port on edge nodes

// Statistical stand-in for an entangled-photon payload. Switches never read
// anything past payload_id; the descriptor contents are for the egress
// measurement only.
struct QuantumPayloadDescriptor {
    PayloadId payload_id = 0;
    codec::EntanglementType entanglement = codec::EntanglementType::none;
    std::uint32_t duration_us = 0;
    std::string source_model_ref;
    photonics::ChannelState accumulated_channel{.wdm_crosstalk_db = -1e9};
    bool sealed = true;
    bool empty = false; // supervisory probes carry no pairs
};

enum class WavelengthAssignment { time_multiplexed_same_wavelength, separate_wavelength };

struct QwDatagram {
    codec::HeaderBytes header_bits{};
    QuantumPayloadDescriptor payload;
    codec::TailBytes tail_bits{};
    WavelengthAssignment wavelength_assignment =
        WavelengthAssignment::separate_wavelength;
};

struct ForwardingEntry {
    int in_port = 0;
    std::uint32_t in_label = 0;
    int out_port = 0;
    std::uint32_t out_label = 0;

    bool operator==(const ForwardingEntry&) const = default;
};

class ForwardingTable {
public:
    // false on (in_port, in_label) collision with a different entry.
    bool install(const ForwardingEntry& e);
    bool remove(int in_port, std::uint32_t in_label);
    std::optional<ForwardingEntry> lookup(int in_port, std::uint32_t in_label) const;
    std::vector<ForwardingEntry> dump() const;
    void clear();

private:
    std::map<std::pair<int, std::uint32_t>, ForwardingEntry> entries_;
};

enum class DropReason { no_route, reserved_class, corrupt };

const char* to_string(DropReason r);

struct Counters {
    std::uint64_t forwarded = 0;
    std::uint64_t dropped_no_route = 0;
    std::uint64_t dropped_reserved_class = 0;
    std::uint64_t dropped_corrupt = 0;

    std::uint64_t dropped_total() const {
        return dropped_no_route + dropped_reserved_class + dropped_corrupt;
    }
};

// Run-wide no-measurement test hook: every unseal is recorded; more than one
// unseal per payload, or any unseal away from an edge, is a violation.
class MeasurementAudit {
public:
    void record_unseal(PayloadId id, bool at_edge);
    int unseal_count(PayloadId id) const;
    bool violated() const { return !violations_.empty(); }
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::unordered_map<PayloadId, int> unseals_;
    std::vector<std::string> violations_;
};

struct ForwardDecision {
    int out_port = 0;
    QwDatagram datagram;
    SimTimeNs depart_time_ns = 0;
};

struct Drop {
    DropReason reason;
};

using ProcessResult = std::variant<ForwardDecision, Drop>;

// QW swapping module of a core switching router: unwrap, look up, swap
// label, rewrap, delay the payload, forward. Drops are counted, never
// signalled on the data plane.
class CoreNode {
public:
    CoreNode(NodeId id, SimTimeNs payload_delay_ns, SimTimeNs header_latency_ns);

    const NodeId& id() const { return id_; }
    ForwardingTable& table() { return table_; }
    const ForwardingTable& table() const { return table_; }
    const Counters& counters() const { return counters_; }
    SimTimeNs payload_delay_ns() const { return payload_delay_ns_; }

    ProcessResult process_datagram(int in_port, const QwDatagram& dg, SimTimeNs now_ns);

private:
    NodeId id_;
    SimTimeNs payload_delay_ns_;
    SimTimeNs header_latency_ns_;
    ForwardingTable table_;
    Counters counters_;
};

struct ClientRequest {
    NodeId dst;
    codec::EntanglementType entanglement = codec::EntanglementType::polarization;
    std::uint32_t duration_us = 1130;
    std::uint8_t qos = 0;
    codec::ServiceType tos = codec::ServiceType::non_real_time;
    std::uint8_t priority = 0;
};

enum class EdgeError { UnknownCircuit, ChecksumMismatch, NotForThisNode };

struct DeliveredPayload {
    QuantumPayloadDescriptor descriptor;
    photonics::LinkMetrics measured;
};

// Parameters the egress edge uses to turn an accumulated channel into
// measured link metrics.
struct MeasurementConfig {
    photonics::PairSourceModel source;
    photonics::DetectorModel detector;
    photonics::ReceiverModel receiver;
    photonics::HeaderMode header_mode = photonics::HeaderMode::burst;
    double launch_dbm = -21.0;
    photonics::DutyCycle duty;
    double integration_s = 1.0;
};

class EdgeNode {
public:
    EdgeNode(NodeId id, MeasurementConfig cfg);

    const NodeId& id() const { return id_; }
    ForwardingTable& table() { return table_; }
    const ForwardingTable& table() const { return table_; }
    const Counters& counters() const { return counters_; }
    const MeasurementConfig& measurement() const { return cfg_; }

    void bind_circuit(const NodeId& dst, std::uint32_t circuit_id);
    void unbind_circuit(const NodeId& dst);

    // Wraps a fresh sealed payload; payload ids come from next_payload_id.
    Expected<QwDatagram, EdgeError> ingress(const ClientRequest& req,
                                            PayloadId payload_id) const;

    // Builds an empty class-B supervisory datagram on the given circuit.
    Expected<QwDatagram, EdgeError> make_probe(std::uint32_t circuit_id,
                                               std::uint32_t window_us) const;

    // Unwraps at the destination: header/tail validation, single unseal,
    // coincidence measurement over the accumulated channel.
    Expected<DeliveredPayload, EdgeError> egress(int in_port, const QwDatagram& dg,
                                                 MeasurementAudit& audit);

    void count_corrupt() { ++counters_.dropped_corrupt; }

private:
    NodeId id_;
    MeasurementConfig cfg_;
    ForwardingTable table_;
    Counters counters_;
    std::map<NodeId, std::uint32_t> circuits_; // dst -> outgoing label
};

} // namespace qw::node

#endif
