#include "qwire/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qw::control {

const char* to_string(MsgKind k) {
    switch (k) {
    case MsgKind::InstallEntry: return "InstallEntry";
    case MsgKind::RemoveEntry: return "RemoveEntry";
    case MsgKind::TelemetryReport: return "TelemetryReport";
    case MsgKind::ProbeRequest: return "ProbeRequest";
    case MsgKind::ProbeResult: return "ProbeResult";
    case MsgKind::CounterReport: return "CounterReport";
    case MsgKind::TransportAck: return "TransportAck";
    case MsgKind::Ack: return "Ack";
    }
    return "?";
}

const char* to_string(Alarm a) {
    switch (a) {
    case Alarm::ok: return "ok";
    case Alarm::degraded: return "degraded";
    case Alarm::blind_spot_suspected: return "blind_spot_suspected";
    }
    return "?";
}

const char* to_string(InstallError e) {
    switch (e) {
    case InstallError::LabelCollision: return "LabelCollision";
    case InstallError::UnreachablePath: return "UnreachablePath";
    case InstallError::UnknownNode: return "UnknownNode";
    }
    return "?";
}

DccMessage DccEndpoint::stamp(const std::string& to, MsgKind kind, MsgBody body) {
    DccMessage msg;
    msg.kind = kind;
    msg.from = id_;
    msg.to = to;
    msg.seq = ++next_out_[to];
    msg.body = std::move(body);
    outstanding_[{to, msg.seq}] = msg;
    return msg;
}

DccMessage DccEndpoint::make_ack(const std::string& to, std::uint64_t acked_seq) const {
    DccMessage msg;
    msg.kind = MsgKind::Ack;
    msg.from = id_;
    msg.to = to;
    msg.seq = 0;
    msg.body = AckBody{acked_seq};
    return msg;
}

std::vector<DccMessage> DccEndpoint::accept(const DccMessage& msg) {
    std::vector<DccMessage> deliverable;
    if (msg.kind == MsgKind::Ack)
        return deliverable;
    std::uint64_t& expected = next_in_[msg.from];
    if (msg.seq <= expected)
        return deliverable; // duplicate retransmission
    if (msg.seq == expected + 1) {
        deliverable.push_back(msg);
        expected = msg.seq;
        auto& buf = reorder_[msg.from];
        while (!buf.empty() && buf.begin()->first == expected + 1) {
            deliverable.push_back(buf.begin()->second);
            expected = buf.begin()->first;
            buf.erase(buf.begin());
        }
    } else {
        reorder_[msg.from].emplace(msg.seq, msg);
    }
    return deliverable;
}

void DccEndpoint::on_ack(const std::string& peer, std::uint64_t seq) {
    outstanding_.erase({peer, seq});
}

std::vector<DccMessage> DccEndpoint::unacked() const {
    std::vector<DccMessage> out;
    out.reserve(outstanding_.size());
    for (const auto& [key, msg] : outstanding_)
        out.push_back(msg);
    return out;
}

bool DccEndpoint::has_unacked() const { return !outstanding_.empty(); }

Controller::Controller(ControllerConfig cfg) : cfg_(std::move(cfg)), dcc_("controller") {}

void Controller::add_node(const NodeId& id, bool is_edge) { nodes_[id] = is_edge; }

void Controller::add_link(const NodeId& a, const NodeId& b, int port_at_a, int port_at_b,
                          const photonics::ChannelState& ch) {
    // Fiber links are bidirectional; monitoring state is per direction.
    for (const auto& [x, y] : {std::make_pair(a, b), std::make_pair(b, a)}) {
        const LinkId id = link_id(x, y);
        link_channels_[id] = ch;
        link_ends_[id] = {x, y};
        link_order_.push_back(id);
        links_[id] = LinkState{};
    }
    port_to_[a][b] = port_at_a;
    port_to_[b][a] = port_at_b;
}

Expected<CircuitPlan, InstallError> Controller::plan_circuit(const std::vector<NodeId>& path,
                                                             std::uint32_t circuit_id) {
    if (path.size() < 2)
        return InstallError::UnreachablePath;
    for (const auto& n : path)
        if (!nodes_.count(n))
            return InstallError::UnknownNode;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        auto it = port_to_.find(path[i]);
        if (it == port_to_.end() || !it->second.count(path[i + 1]))
            return InstallError::UnreachablePath;
    }

    const auto label_used = [&](const NodeId& n, int in_port, std::uint32_t label) {
        auto it = intended_.find(n);
        if (it == intended_.end())
            return false;
        return std::any_of(it->second.begin(), it->second.end(), [&](const auto& e) {
            return e.in_port == in_port && e.in_label == label;
        });
    };

    CircuitPlan plan;
    plan.circuit_id = circuit_id;
    plan.path = path;

    std::uint32_t in_label = circuit_id;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const NodeId& n = path[i];
        const int in_port = i == 0 ? node::kLocalPort : port_to_.at(n).at(path[i - 1]);
        if (label_used(n, in_port, in_label))
            return InstallError::LabelCollision;

        node::ForwardingEntry e;
        e.in_port = in_port;
        e.in_label = in_label;
        if (i + 1 == path.size()) {
            e.out_port = node::kLocalPort;
            e.out_label = in_label;
        } else {
            e.out_port = port_to_.at(n).at(path[i + 1]);
            // Pick the next hop's in-label, avoiding collisions on its in-port.
            const NodeId& next = path[i + 1];
            const int next_in_port = port_to_.at(next).at(n);
            std::uint32_t out_label = circuit_id;
            while (label_used(next, next_in_port, out_label))
                out_label = (out_label + 1) & codec::kMaxCircuitId;
            e.out_label = out_label;
            in_label = out_label;
        }
        plan.entries.emplace_back(n, e);
    }
    return plan;
}

std::vector<DccMessage> Controller::begin_install(const CircuitPlan& plan, std::int64_t now_ns) {
    InstallJob job;
    job.plan = plan;
    job.deadline_ns = now_ns + cfg_.install_timeout_ns;

    std::vector<DccMessage> out;
    for (const auto& [n, entry] : plan.entries) {
        DccMessage msg =
            dcc_.stamp(n, MsgKind::InstallEntry, InstallEntryBody{plan.circuit_id, entry});
        job.awaiting.insert({n, msg.seq});
        out.push_back(std::move(msg));
        intended_[n].push_back(entry);
    }
    installs_[plan.circuit_id] = std::move(job);
    return out;
}

std::vector<DccMessage> Controller::poll(std::int64_t now_ns) {
    std::vector<DccMessage> out;
    for (auto& [cid, job] : installs_) {
        if (job.status != CircuitStatus::pending || now_ns < job.deadline_ns)
            continue;
        job.status = CircuitStatus::failed;
        // Rollback everywhere: in-order DCC delivery guarantees the remove
        // lands after any still-in-flight install.
        for (const auto& [n, entry] : job.plan.entries) {
            out.push_back(
                dcc_.stamp(n, MsgKind::RemoveEntry, RemoveEntryBody{entry.in_port, entry.in_label}));
            auto& tbl = intended_[n];
            std::erase(tbl, entry);
        }
    }
    return out;
}

void Controller::on_dcc_ack(const std::string& from, std::uint64_t seq) {
    dcc_.on_ack(from, seq);
    for (auto& [cid, job] : installs_) {
        if (job.status != CircuitStatus::pending)
            continue;
        if (job.awaiting.erase({from, seq}) > 0) {
            job.acked_nodes.insert(from);
            if (job.awaiting.empty())
                job.status = CircuitStatus::up;
            return;
        }
    }
}

void Controller::on_telemetry(const TelemetryBody& t, std::int64_t now_ns) {
    (void)now_ns;
    auto it = links_.find(t.link);
    if (it == links_.end())
        return;
    LinkState& s = it->second;
    s.latest.header_ber = t.ber_sample;
    s.latest.received_power_dbm = t.rx_power_dbm;
    s.ber_history.push_back(t.ber_sample);
    while (s.ber_history.size() > cfg_.ber_history_cap)
        s.ber_history.pop_front();
    if (auto band = infer_quantum_quality(t.link))
        s.inferred = band.value();
}

void Controller::on_probe_result(const ProbeResultBody& p, std::int64_t now_ns) {
    (void)now_ns;
    auto it = links_.find(p.link);
    if (it == links_.end())
        return;
    it->second.probe_noise_rate_hz = p.noise_photon_rate_hz;
    it->second.latest.noise_photon_rate_hz = p.noise_photon_rate_hz;
}

double Controller::car_at_attenuation(double attenuation_db) const {
    photonics::ChannelState ch;
    ch.attenuation_db = attenuation_db;
    ch.wdm_crosstalk_db = cfg_.calibration.anchors.wdm_crosstalk_db;
    // Long integration: this is the model's expected CAR, so keep the count
    // totals far from the zero-accidentals sentinel even at deep loss.
    const auto stats =
        photonics::coincidence_stats(cfg_.calibration.source, cfg_.calibration.detector, ch,
                                     cfg_.header_mode, cfg_.launch_dbm, cfg_.duty, 1e4);
    return stats.car_unbounded ? 99.0 : stats.car_db;
}

Expected<CarBand, InferError> Controller::infer_quantum_quality(const LinkId& link) {
    auto it = links_.find(link);
    if (it == links_.end() || it->second.ber_history.size() < cfg_.min_ber_samples)
        return InferError::InsufficientSamples;

    std::vector<double> samples(it->second.ber_history.begin(), it->second.ber_history.end());
    std::sort(samples.begin(), samples.end());
    const double ber_min = samples.front();
    const double ber_max = samples.back();
    const double ber_med = samples[samples.size() / 2];

    const auto& rx = cfg_.calibration.receiver;
    CarBand band;
    if (ber_med <= cfg_.ber_floor) {
        // BER unmeasurably good: attenuation is at most the floor-equivalent,
        // so the CAR is at least the CAR there.
        const double att_cap = photonics::attenuation_for_ber(cfg_.ber_floor, rx, cfg_.launch_dbm);
        band.lo_db = car_at_attenuation(att_cap) - cfg_.band_margin_db;
        band.hi_db = std::numeric_limits<double>::infinity();
        band.open_ended = true;
        return band;
    }

    // CAR is nonincreasing in attenuation: the worst (largest) BER bounds the
    // band from below, the best BER from above.
    const double att_hi = photonics::attenuation_for_ber(ber_max, rx, cfg_.launch_dbm);
    band.lo_db = car_at_attenuation(att_hi) - cfg_.band_margin_db;
    if (ber_min <= cfg_.ber_floor) {
        band.hi_db = std::numeric_limits<double>::infinity();
        band.open_ended = true;
    } else {
        const double att_lo = photonics::attenuation_for_ber(ber_min, rx, cfg_.launch_dbm);
        band.hi_db = car_at_attenuation(att_lo) + cfg_.band_margin_db;
    }
    return band;
}

void Controller::set_alarm(const LinkId& link, Alarm a, std::int64_t now_ns) {
    LinkState& s = links_.at(link);
    if (s.alarm == a)
        return;
    s.alarm = a;
    alarm_log_.push_back(AlarmEvent{now_ns, link, a});
}

std::vector<std::pair<LinkId, Alarm>> Controller::evaluate_alarms(std::int64_t now_ns) {
    std::vector<std::pair<LinkId, Alarm>> out;
    for (const auto& link : link_order_) {
        const LinkState& s = links_.at(link);
        Alarm a = Alarm::ok;
        const bool band_known = s.inferred.has_value();
        const bool band_healthy =
            band_known && (s.inferred->open_ended ||
                           s.inferred->hi_db >= cfg_.degraded_car_threshold_db);
        const bool noisy = s.probe_noise_rate_hz &&
                           *s.probe_noise_rate_hz > cfg_.blind_spot_noise_threshold_hz;
        if (band_known && !band_healthy)
            a = Alarm::degraded;
        else if (band_healthy && noisy)
            a = Alarm::blind_spot_suspected;
        set_alarm(link, a, now_ns);
        out.emplace_back(link, a);
    }
    return out;
}

CircuitStatus Controller::circuit_status(std::uint32_t circuit_id) const {
    auto it = installs_.find(circuit_id);
    return it == installs_.end() ? CircuitStatus::failed : it->second.status;
}

std::vector<node::ForwardingEntry> Controller::intended_table(const NodeId& node) const {
    auto it = intended_.find(node);
    return it == intended_.end() ? std::vector<node::ForwardingEntry>{} : it->second;
}

} // namespace qw::control
