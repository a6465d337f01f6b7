#include "qwire/node.hpp"

#include <utility>

namespace qw::node {

bool ForwardingTable::install(const ForwardingEntry& e) {
    const auto key = std::make_pair(e.in_port, e.in_label);
    auto it = entries_.find(key);
    if (it != entries_.end())
        return it->second == e; // re-install of the identical entry is idempotent
    entries_.emplace(key, e);
    return true;
}

bool ForwardingTable::remove(int in_port, std::uint32_t in_label) {
    return entries_.erase(std::make_pair(in_port, in_label)) > 0;
}

std::optional<ForwardingEntry> ForwardingTable::lookup(int in_port, std::uint32_t in_label) const {
    auto it = entries_.find(std::make_pair(in_port, in_label));
    if (it == entries_.end())
        return std::nullopt;
    return it->second;
}

std::vector<ForwardingEntry> ForwardingTable::dump() const {
    std::vector<ForwardingEntry> out;
    out.reserve(entries_.size());
    for (const auto& [key, e] : entries_)
        out.push_back(e);
    return out;
}

void ForwardingTable::clear() { entries_.clear(); }

const char* to_string(DropReason r) {
    switch (r) {
    case DropReason::no_route: return "no_route";
    case DropReason::reserved_class: return "reserved_class";
    case DropReason::corrupt: return "corrupt";
    }
    return "?";
}

void MeasurementAudit::record_unseal(PayloadId id, bool at_edge) {
    const int n = ++unseals_[id];
    if (!at_edge)
        violations_.push_back("payload " + std::to_string(id) + " unsealed at a core node");
    else if (n > 1)
        violations_.push_back("payload " + std::to_string(id) + " unsealed " +
                              std::to_string(n) + " times");
}

int MeasurementAudit::unseal_count(PayloadId id) const {
    auto it = unseals_.find(id);
    return it == unseals_.end() ? 0 : it->second;
}

CoreNode::CoreNode(NodeId id, SimTimeNs payload_delay_ns, SimTimeNs header_latency_ns)
    : id_(std::move(id)), payload_delay_ns_(payload_delay_ns),
      header_latency_ns_(header_latency_ns) {
    // The payload must not overtake its own header.
    if (payload_delay_ns_ < header_latency_ns_)
        payload_delay_ns_ = header_latency_ns_;
}

ProcessResult CoreNode::process_datagram(int in_port, const QwDatagram& dg, SimTimeNs now_ns) {
    const auto fields = codec::decode_header(dg.header_bits);
    if (!fields || !codec::decode_tail(dg.tail_bits, dg.header_bits)) {
        ++counters_.dropped_corrupt;
        return Drop{DropReason::corrupt};
    }
    const codec::HeaderFields& f = fields.value();
    if (f.reserved_class()) {
        ++counters_.dropped_reserved_class;
        return Drop{DropReason::reserved_class};
    }
    if (f.payload_duration_us == 0) {
        ++counters_.dropped_corrupt;
        return Drop{DropReason::corrupt};
    }
    const auto entry = table_.lookup(in_port, f.circuit_id);
    if (!entry) {
        ++counters_.dropped_no_route;
        return Drop{DropReason::no_route};
    }

    ForwardDecision out;
    out.out_port = entry->out_port;
    out.datagram = dg; // payload descriptor passes through untouched
    out.datagram.header_bits = codec::swap_label(dg.header_bits, entry->out_label).value();
    out.datagram.tail_bits = codec::encode_tail(out.datagram.header_bits);
    out.depart_time_ns = now_ns + payload_delay_ns_;
    ++counters_.forwarded;
    return out;
}

EdgeNode::EdgeNode(NodeId id, MeasurementConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {}

void EdgeNode::bind_circuit(const NodeId& dst, std::uint32_t circuit_id) {
    circuits_[dst] = circuit_id;
}

void EdgeNode::unbind_circuit(const NodeId& dst) { circuits_.erase(dst); }

Expected<QwDatagram, EdgeError> EdgeNode::ingress(const ClientRequest& req,
                                                  PayloadId payload_id) const {
    auto it = circuits_.find(req.dst);
    if (it == circuits_.end())
        return EdgeError::UnknownCircuit;

    QwDatagram dg;
    dg.payload.payload_id = payload_id;
    dg.payload.entanglement = req.entanglement;
    dg.payload.duration_us = req.duration_us;
    dg.payload.source_model_ref = "calibrated-default";
    dg.payload.sealed = true;

    codec::HeaderFields f;
    f.cls = codec::QwClass::A;
    f.circuit_id = it->second;
    f.priority = req.priority;
    f.payload_duration_us = req.duration_us;
    f.entanglement = req.entanglement;
    f.qos = req.qos;
    f.tos = req.tos;
    dg.header_bits = codec::encode_header(f).value();
    dg.tail_bits = codec::encode_tail(dg.header_bits);
    return dg;
}

Expected<QwDatagram, EdgeError> EdgeNode::make_probe(std::uint32_t circuit_id,
                                                     std::uint32_t window_us) const {
    QwDatagram dg;
    dg.payload.sealed = true;
    dg.payload.empty = true;
    dg.payload.duration_us = window_us;
    dg.payload.source_model_ref = "supervisory";

    codec::HeaderFields f;
    f.cls = codec::QwClass::B;
    f.circuit_id = circuit_id;
    f.payload_duration_us = window_us;
    f.entanglement = codec::EntanglementType::none;
    dg.header_bits = codec::encode_header(f).value();
    dg.tail_bits = codec::encode_tail(dg.header_bits);
    return dg;
}

Expected<DeliveredPayload, EdgeError> EdgeNode::egress(int in_port, const QwDatagram& dg,
                                                       MeasurementAudit& audit) {
    const auto fields = codec::decode_header(dg.header_bits);
    if (!fields || !codec::decode_tail(dg.tail_bits, dg.header_bits)) {
        ++counters_.dropped_corrupt;
        return EdgeError::ChecksumMismatch;
    }
    const auto entry = table_.lookup(in_port, fields.value().circuit_id);
    if (!entry || entry->out_port != kLocalPort) {
        ++counters_.dropped_no_route;
        return EdgeError::NotForThisNode;
    }

    DeliveredPayload out;
    out.descriptor = dg.payload;
    audit.record_unseal(out.descriptor.payload_id, /*at_edge=*/true);
    out.descriptor.sealed = false;

    const auto& ch = out.descriptor.accumulated_channel;
    out.measured.attenuation_db = ch.attenuation_db;
    out.measured.received_power_dbm = photonics::received_power_dbm(cfg_.launch_dbm, ch);
    out.measured.header_ber = photonics::header_ber(out.measured.received_power_dbm, cfg_.receiver);
    if (out.descriptor.empty) {
        // Supervisory probe: count photons in the empty payload window.
        out.measured.noise_photon_rate_hz = photonics::payload_slot_noise_rate(
            cfg_.source, cfg_.detector, ch, cfg_.header_mode, cfg_.launch_dbm);
        out.measured.stats.integration_s = out.descriptor.duration_us * 1e-6;
    } else {
        out.measured.stats = photonics::coincidence_stats(cfg_.source, cfg_.detector, ch,
                                                          cfg_.header_mode, cfg_.launch_dbm,
                                                          cfg_.duty, cfg_.integration_s);
    }
    ++counters_.forwarded;
    return out;
}

} // namespace qw::node
