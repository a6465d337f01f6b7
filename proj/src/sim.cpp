#include "qwire/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <set>

namespace qw::sim {

namespace {

constexpr SimTime kPropNsPerKm = 5000; // ~5 us/km in fiber
constexpr int kDccMaxAttempts = 25;
constexpr std::size_t kMaxStoredTraces = 2000;
constexpr std::size_t kMaxLinkSamples = 5000;

photonics::HeaderMode parse_mode(const std::string& s, const std::string& field) {
    if (s == "none")
        return photonics::HeaderMode::none;
    if (s == "continuous")
        return photonics::HeaderMode::continuous;
    if (s == "burst")
        return photonics::HeaderMode::burst;
    throw ConfigError(field, "unknown header mode '" + s + "'");
}

double fnum(const Json& j, const char* key, double def) {
    if (!j.contains(key))
        return def;
    if (!j[key].is_number())
        throw ConfigError(key, "expected a number");
    return j[key].get<double>();
}

std::string fstr(const Json& j, const char* key, const std::string& def) {
    if (!j.contains(key))
        return def;
    if (!j[key].is_string())
        throw ConfigError(key, "expected a string");
    return j[key].get<std::string>();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void EventQueue::schedule(SimTime t, std::function<void()> fn) {
    if (t < now_)
        throw std::logic_error("event scheduled in the past");
    heap_.push(Item{t, next_seq_++, std::move(fn)});
}

bool EventQueue::step() {
    if (heap_.empty())
        return false;
    Item item = heap_.top();
    heap_.pop();
    now_ = item.t;
    item.fn();
    return true;
}

// ---------------------------------------------------------------------------
// Scenario configuration

Json scenario_to_json(const Scenario& s) {
    Json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["duration_s"] = s.duration_s;
    j["duty"] = {{"header_us", s.duty.header_us},
                 {"payload_us", s.duty.payload_us},
                 {"period_us", s.duty.period_us}};
    j["launch_dbm"] = s.launch_dbm;
    j["header_mode"] = photonics::to_string(s.header_mode);
    Json nodes = Json::array();
    for (const auto& n : s.topology.nodes)
        nodes.push_back({{"id", n.id}, {"kind", n.is_edge ? "edge" : "core"}});
    Json links = Json::array();
    for (const auto& l : s.topology.links) {
        links.push_back({{"a", l.a},
                         {"b", l.b},
                         {"dcc_delay_us", l.dcc_delay_us},
                         {"channel",
                          {{"attenuation_db", l.channel.attenuation_db},
                           {"length_km", l.channel.length_km},
                           {"dispersion_ps_nm_km", l.channel.dispersion_ps_nm_km},
                           {"wdm_crosstalk_db", l.channel.wdm_crosstalk_db},
                           {"injected_noise_rate_per_ns", l.channel.injected_noise_rate_per_ns}}}});
    }
    j["topology"] = {{"nodes", nodes}, {"links", links}};
    Json circuits = Json::array();
    for (const auto& c : s.circuits)
        circuits.push_back({{"src", c.src},
                            {"dst", c.dst},
                            {"circuit_id", c.circuit_id},
                            {"demand", c.demand},
                            {"rate_hz", c.rate_hz}});
    j["circuits"] = circuits;
    if (!s.sweep_attenuations_db.empty())
        j["sweep"] = {{"attenuations_db", s.sweep_attenuations_db}};
    if (!s.mode_sweep.empty()) {
        Json m = Json::array();
        for (auto mode : s.mode_sweep)
            m.push_back(photonics::to_string(mode));
        j["mode_sweep"] = m;
    }
    j["header_loss_rate"] = s.header_loss_rate;
    j["dcc_loss_rate"] = s.dcc_loss_rate;
    j["transport"] = {{"window", s.transport.window},
                      {"timeout_factor", s.transport.timeout_factor},
                      {"max_retries", s.transport.max_retries}};
    j["probe_period_s"] = s.probe_period_s;
    j["integration_s"] = s.integration_s;
    j["telemetry_jitter_sigma"] = s.telemetry_jitter_sigma;
    j["monte_carlo"] = s.monte_carlo;
    j["mc_integration_s"] = s.mc_integration_s;
    j["calibration_anchors"] = {{"car_none_db", s.anchors.car_none_db},
                                {"car_continuous_db", s.anchors.car_continuous_db},
                                {"car_burst_db", s.anchors.car_burst_db},
                                {"launch_dbm", s.anchors.launch_dbm},
                                {"wdm_crosstalk_db", s.anchors.wdm_crosstalk_db},
                                {"coincidence_window_ns", s.anchors.coincidence_window_ns},
                                {"heralding_efficiency", s.anchors.heralding_efficiency},
                                {"dark_count_rate_hz", s.anchors.dark_count_rate_hz}};
    return j;
}

photonics::CalibrationAnchors anchors_from_json(const Json& j) {
    photonics::CalibrationAnchors a;
    a.car_none_db = fnum(j, "car_none_db", a.car_none_db);
    a.car_continuous_db = fnum(j, "car_continuous_db", a.car_continuous_db);
    a.car_burst_db = fnum(j, "car_burst_db", a.car_burst_db);
    a.launch_dbm = fnum(j, "launch_dbm", a.launch_dbm);
    a.wdm_crosstalk_db = fnum(j, "wdm_crosstalk_db", a.wdm_crosstalk_db);
    a.coincidence_window_ns = fnum(j, "coincidence_window_ns", a.coincidence_window_ns);
    a.heralding_efficiency = fnum(j, "heralding_efficiency", a.heralding_efficiency);
    a.dark_count_rate_hz = fnum(j, "dark_count_rate_hz", a.dark_count_rate_hz);
    return a;
}

namespace {

void validate(const Scenario& s) {
    if (s.duty.period_us + 1e-9 < s.duty.header_us + s.duty.payload_us)
        throw ConfigError("duty.period_us", "period shorter than header + payload");
    if (s.duration_s < 0)
        throw ConfigError("duration_s", "must be >= 0");
    if (s.header_loss_rate < 0 || s.header_loss_rate >= 1)
        throw ConfigError("header_loss_rate", "must be in [0,1)");
    if (s.dcc_loss_rate < 0 || s.dcc_loss_rate >= 1)
        throw ConfigError("dcc_loss_rate", "must be in [0,1)");
    if (s.transport.window == 0)
        throw ConfigError("transport.window", "must be >= 1");
    if (s.transport.max_retries < 0)
        throw ConfigError("transport.max_retries", "must be >= 0");
    if (s.integration_s <= 0)
        throw ConfigError("integration_s", "must be > 0");

    std::set<std::string> ids;
    std::set<std::string> edges;
    for (const auto& n : s.topology.nodes) {
        if (!ids.insert(n.id).second)
            throw ConfigError("topology.nodes", "duplicate node id '" + n.id + "'");
        if (n.is_edge)
            edges.insert(n.id);
    }
    for (const auto& l : s.topology.links) {
        if (!ids.count(l.a) || !ids.count(l.b))
            throw ConfigError("topology.links", "link endpoint not a known node");
        if (l.channel.attenuation_db < 0)
            throw ConfigError("topology.links.channel.attenuation_db", "must be >= 0");
        if (l.channel.wdm_crosstalk_db > 0)
            throw ConfigError("topology.links.channel.wdm_crosstalk_db", "must be <= 0");
    }
    std::set<std::uint32_t> cids;
    for (const auto& c : s.circuits) {
        if (!edges.count(c.src))
            throw ConfigError("circuits.src", "'" + c.src + "' is not an edge node");
        if (!edges.count(c.dst))
            throw ConfigError("circuits.dst", "'" + c.dst + "' is not an edge node");
        if (c.circuit_id > codec::kMaxCircuitId)
            throw ConfigError("circuits.circuit_id", "label exceeds 20 bits");
        if (!cids.insert(c.circuit_id).second)
            throw ConfigError("circuits.circuit_id", "duplicate circuit id");
    }
    for (std::size_t i = 1; i < s.sweep_attenuations_db.size(); ++i)
        if (s.sweep_attenuations_db[i] < s.sweep_attenuations_db[i - 1])
            throw ConfigError("sweep.attenuations_db", "must be nondecreasing");
}

} // namespace

Scenario scenario_from_json(const Json& j) {
    Scenario s;
    s.name = fstr(j, "name", s.name);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("seed", "expected an integer");
        s.seed = j["seed"].get<std::uint64_t>();
    }
    s.duration_s = fnum(j, "duration_s", s.duration_s);
    if (j.contains("duty")) {
        const Json& d = j["duty"];
        s.duty.header_us = fnum(d, "header_us", s.duty.header_us);
        s.duty.payload_us = fnum(d, "payload_us", s.duty.payload_us);
        s.duty.period_us = fnum(d, "period_us", s.duty.period_us);
    }
    s.launch_dbm = fnum(j, "launch_dbm", s.launch_dbm);
    s.header_mode = parse_mode(fstr(j, "header_mode", "burst"), "header_mode");
    if (j.contains("topology")) {
        const Json& t = j["topology"];
        for (const Json& n : t.value("nodes", Json::array())) {
            NodeSpec ns;
            ns.id = fstr(n, "id", "");
            if (ns.id.empty())
                throw ConfigError("topology.nodes.id", "missing node id");
            const std::string kind = fstr(n, "kind", "core");
            if (kind != "edge" && kind != "core")
                throw ConfigError("topology.nodes.kind", "must be 'edge' or 'core'");
            ns.is_edge = kind == "edge";
            s.topology.nodes.push_back(ns);
        }
        for (const Json& l : t.value("links", Json::array())) {
            LinkSpec ls;
            ls.a = fstr(l, "a", "");
            ls.b = fstr(l, "b", "");
            ls.dcc_delay_us = fnum(l, "dcc_delay_us", ls.dcc_delay_us);
            if (l.contains("channel")) {
                const Json& c = l["channel"];
                ls.channel.attenuation_db = fnum(c, "attenuation_db", 0.0);
                ls.channel.length_km = fnum(c, "length_km", 0.0);
                ls.channel.dispersion_ps_nm_km = fnum(c, "dispersion_ps_nm_km", 17.0);
                ls.channel.wdm_crosstalk_db = fnum(c, "wdm_crosstalk_db", -50.0);
                ls.channel.injected_noise_rate_per_ns =
                    fnum(c, "injected_noise_rate_per_ns", 0.0);
            }
            s.topology.links.push_back(ls);
        }
    }
    for (const Json& c : j.value("circuits", Json::array())) {
        CircuitSpec cs;
        cs.src = fstr(c, "src", "");
        cs.dst = fstr(c, "dst", "");
        cs.circuit_id = static_cast<std::uint32_t>(fnum(c, "circuit_id", 0));
        cs.demand = static_cast<std::uint64_t>(fnum(c, "demand", 0));
        cs.rate_hz = fnum(c, "rate_hz", 0.0);
        s.circuits.push_back(cs);
    }
    if (j.contains("sweep"))
        for (const Json& a : j["sweep"].value("attenuations_db", Json::array()))
            s.sweep_attenuations_db.push_back(a.get<double>());
    if (j.contains("mode_sweep"))
        for (const Json& m : j["mode_sweep"])
            s.mode_sweep.push_back(parse_mode(m.get<std::string>(), "mode_sweep"));
    s.header_loss_rate = fnum(j, "header_loss_rate", 0.0);
    s.dcc_loss_rate = fnum(j, "dcc_loss_rate", 0.0);
    if (j.contains("transport")) {
        const Json& t = j["transport"];
        s.transport.window = static_cast<std::size_t>(fnum(t, "window", 8));
        s.transport.timeout_factor = fnum(t, "timeout_factor", 3.0);
        s.transport.max_retries = static_cast<int>(fnum(t, "max_retries", 5));
    }
    s.probe_period_s = fnum(j, "probe_period_s", s.probe_period_s);
    s.integration_s = fnum(j, "integration_s", s.integration_s);
    s.telemetry_jitter_sigma = fnum(j, "telemetry_jitter_sigma", s.telemetry_jitter_sigma);
    s.monte_carlo = j.value("monte_carlo", false);
    s.mc_integration_s = fnum(j, "mc_integration_s", s.mc_integration_s);
    if (j.contains("calibration_anchors"))
        s.anchors = anchors_from_json(j["calibration_anchors"]);
    validate(s);
    return s;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

Topology two_edge_link(const photonics::ChannelState& ch) {
    Topology t;
    t.nodes = {{"e1", true}, {"e2", true}};
    t.links = {{"e1", "e2", ch, 10.0}};
    return t;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"fig3_modes", "fig4_burst_5km", "fig5_sweep", "blindspot", "multihop"};
}

Scenario preset(const std::string& name) {
    Scenario s;
    s.name = name;
    if (name == "fig3_modes") {
        s.launch_dbm = -21.0;
        s.integration_s = 100.0;
        s.duration_s = 0.0;
        s.topology = two_edge_link(photonics::ChannelState{});
        s.mode_sweep = {photonics::HeaderMode::none, photonics::HeaderMode::continuous,
                        photonics::HeaderMode::burst};
    } else if (name == "fig4_burst_5km") {
        s.launch_dbm = -21.0;
        s.integration_s = 100.0;
        s.duration_s = 0.0;
        photonics::ChannelState ch;
        ch.length_km = 5.0;
        s.topology = two_edge_link(ch);
        s.mode_sweep = {photonics::HeaderMode::burst};
        s.header_mode = photonics::HeaderMode::burst;
    } else if (name == "fig5_sweep") {
        s.launch_dbm = -28.0;
        s.integration_s = 100.0;
        s.duration_s = 0.0;
        s.topology = two_edge_link(photonics::ChannelState{});
        s.header_mode = photonics::HeaderMode::burst;
        for (int a = 0; a <= 15; ++a)
            s.sweep_attenuations_db.push_back(static_cast<double>(a));
    } else if (name == "blindspot") {
        s.launch_dbm = -21.0;
        s.duration_s = 25.0;
        s.probe_period_s = 10.0;
        s.integration_s = 1.0;
        photonics::ChannelState ch;
        ch.injected_noise_rate_per_ns = 1e-2;
        s.topology = two_edge_link(ch);
        s.circuits = {{"e1", "e2", 7, 30, 0.0}};
        s.header_mode = photonics::HeaderMode::burst;
    } else if (name == "multihop") {
        s.launch_dbm = -21.0;
        s.duration_s = 5.0;
        s.integration_s = 1.0;
        s.probe_period_s = 100.0; // beyond duration: pure data-plane run
        Topology t;
        t.nodes = {{"e1", true}, {"c1", false}, {"c2", false}, {"c3", false}, {"e2", true}};
        photonics::ChannelState ch;
        ch.attenuation_db = 1.0;
        ch.length_km = 1.0;
        t.links = {{"e1", "c1", ch, 10.0},
                   {"c1", "c2", ch, 10.0},
                   {"c2", "c3", ch, 10.0},
                   {"c3", "e2", ch, 10.0}};
        s.topology = t;
        s.circuits = {{"e1", "e2", 7, 1000, 0.0}};
        s.header_mode = photonics::HeaderMode::burst;
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "'");
    }
    return s;
}

// ---------------------------------------------------------------------------
// The discrete-event runner

namespace {

class Runner {
public:
    explicit Runner(const Scenario& s)
        : sc_(s), rng_(s.seed), cal_(photonics::calibrate(s.anchors)) {
        duration_ns_ = static_cast<SimTime>(sc_.duration_s * kSToNs);
        header_ns_ = static_cast<SimTime>(sc_.duty.header_us * kUsToNs);
        payload_ns_ = static_cast<SimTime>(sc_.duty.payload_us * kUsToNs);
        period_ns_ = static_cast<SimTime>(sc_.duty.period_us * kUsToNs);
    }

    Report run() {
        build();
        run_sweeps();
        if (!sc_.circuits.empty() || (duration_ns_ > 0 && !links_.empty())) {
            install_circuits();
            start_periodics();
            start_clients();
            while (q_.step()) {
            }
        }
        finalize();
        return std::move(rep_);
    }

private:
    struct PortRef {
        std::size_t node_idx = 0;
        std::size_t link_idx = 0;
    };
    struct NodeRt {
        std::string id;
        bool is_edge = false;
        std::unique_ptr<node::CoreNode> core;
        std::unique_ptr<node::EdgeNode> edge;
        std::unique_ptr<control::DccEndpoint> dcc;
        std::map<int, PortRef> ports;
        SimTime dcc_delay_ns = 10'000;

        node::ForwardingTable& table() { return is_edge ? edge->table() : core->table(); }
        const node::Counters& counters() const {
            return is_edge ? edge->counters() : core->counters();
        }
    };
    struct Meta {
        transport::RequestId rid = 0;
        int retries = 0;
    };
    struct CircuitRt {
        CircuitSpec spec;
        std::size_t src_idx = 0, dst_idx = 0;
        std::unique_ptr<transport::SenderWindow> window;
        std::deque<Meta> pending;
        std::map<node::PayloadId, Meta> meta;
        std::set<transport::RequestId> delivered_requests;
        std::set<transport::RequestId> gave_up_requests;
        std::set<node::PayloadId> egress_seen;
        std::uint64_t issued = 0;
        bool window_ok = true;
        bool dup_payload = false;
        SimTime timeout_ns = 3'000'000;
        control::CircuitPlan plan;
        std::optional<photonics::LinkMetrics> last_metrics;
        bool started = false;
    };
    struct Flight {
        node::QwDatagram dg;
        std::size_t circuit_idx = static_cast<std::size_t>(-1);
        bool is_probe = false;
        control::LinkId probe_link;
        std::vector<LabelHop> trace;
    };

    // -- construction -------------------------------------------------------

    void build() {
        rep_.scenario_name = sc_.name;
        rep_.seed = sc_.seed;

        node::MeasurementConfig mcfg;
        mcfg.source = cal_.source;
        mcfg.detector = cal_.detector;
        mcfg.receiver = cal_.receiver;
        mcfg.header_mode = sc_.header_mode;
        mcfg.launch_dbm = sc_.launch_dbm;
        mcfg.duty = sc_.duty;
        mcfg.integration_s = sc_.integration_s;

        control::ControllerConfig ccfg;
        ccfg.calibration = cal_;
        ccfg.launch_dbm = sc_.launch_dbm;
        ccfg.header_mode = sc_.header_mode;
        ccfg.duty = sc_.duty;
        ctrl_ = std::make_unique<control::Controller>(ccfg);

        for (const auto& ns : sc_.topology.nodes) {
            NodeRt n;
            n.id = ns.id;
            n.is_edge = ns.is_edge;
            if (ns.is_edge)
                n.edge = std::make_unique<node::EdgeNode>(ns.id, mcfg);
            else
                n.core = std::make_unique<node::CoreNode>(ns.id, header_ns_, header_ns_);
            n.dcc = std::make_unique<control::DccEndpoint>(ns.id);
            node_idx_[ns.id] = nodes_.size();
            nodes_.push_back(std::move(n));
            ctrl_->add_node(ns.id, ns.is_edge);
        }
        std::map<std::size_t, int> next_port;
        for (const auto& ls : sc_.topology.links) {
            const std::size_t ia = node_idx_.at(ls.a);
            const std::size_t ib = node_idx_.at(ls.b);
            const std::size_t li = links_.size();
            links_.push_back(ls);
            link_prop_ns_.push_back(static_cast<SimTime>(ls.channel.length_km * kPropNsPerKm));
            const int pa = ++next_port[ia];
            const int pb = ++next_port[ib];
            nodes_[ia].ports[pa] = PortRef{ib, li};
            nodes_[ib].ports[pb] = PortRef{ia, li};
            link_port_.emplace(std::make_pair(li, ia), pa);
            link_port_.emplace(std::make_pair(li, ib), pb);
            const SimTime dcc_ns = static_cast<SimTime>(ls.dcc_delay_us * kUsToNs);
            nodes_[ia].dcc_delay_ns = std::max(nodes_[ia].dcc_delay_ns, dcc_ns);
            nodes_[ib].dcc_delay_ns = std::max(nodes_[ib].dcc_delay_ns, dcc_ns);
            ctrl_->add_link(ls.a, ls.b, pa, pb, ls.channel);
        }

        for (const auto& cs : sc_.circuits) {
            CircuitRt c;
            c.spec = cs;
            c.src_idx = node_idx_.at(cs.src);
            c.dst_idx = node_idx_.at(cs.dst);
            nodes_[c.src_idx].edge->bind_circuit(cs.dst, cs.circuit_id);
            circuits_.push_back(std::move(c));
        }
    }

    std::vector<std::string> shortest_path(const std::string& src, const std::string& dst) {
        std::map<std::size_t, std::size_t> prev;
        std::deque<std::size_t> fifo{node_idx_.at(src)};
        std::set<std::size_t> seen{node_idx_.at(src)};
        while (!fifo.empty()) {
            const std::size_t cur = fifo.front();
            fifo.pop_front();
            if (cur == node_idx_.at(dst))
                break;
            for (const auto& [port, ref] : nodes_[cur].ports) {
                if (seen.insert(ref.node_idx).second) {
                    prev[ref.node_idx] = cur;
                    fifo.push_back(ref.node_idx);
                }
            }
        }
        std::vector<std::string> path;
        std::size_t cur = node_idx_.at(dst);
        if (cur != node_idx_.at(src) && !prev.count(cur))
            return path; // unreachable
        while (true) {
            path.push_back(nodes_[cur].id);
            if (cur == node_idx_.at(src))
                break;
            cur = prev.at(cur);
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    void install_circuits() {
        for (auto& c : circuits_) {
            const auto path = shortest_path(c.spec.src, c.spec.dst);
            if (path.empty())
                throw ConfigError("circuits", "no path from '" + c.spec.src + "' to '" +
                                                  c.spec.dst + "'");
            auto plan = ctrl_->plan_circuit(path, c.spec.circuit_id);
            if (!plan)
                throw ConfigError("circuits", std::string("install failed: ") +
                                                  control::to_string(plan.error()));
            c.plan = plan.value();
            egress_label_.emplace(
                std::make_pair(path.back(), c.plan.entries.back().second.in_label),
                static_cast<std::size_t>(&c - circuits_.data()));
            c.timeout_ns = estimate_timeout(c.plan);
            for (const auto& msg : ctrl_->begin_install(c.plan, q_.now()))
                dcc_send(msg);
        }
    }

    SimTime estimate_timeout(const control::CircuitPlan& plan) {
        SimTime oneway = payload_ns_;
        for (std::size_t i = 0; i + 1 < plan.path.size(); ++i) {
            const std::size_t a = node_idx_.at(plan.path[i]);
            for (const auto& [port, ref] : nodes_[a].ports)
                if (nodes_[ref.node_idx].id == plan.path[i + 1])
                    oneway += link_prop_ns_[ref.link_idx] + header_ns_ + header_ns_;
        }
        const SimTime rtt = oneway + nodes_[node_idx_.at(plan.path.back())].dcc_delay_ns;
        return static_cast<SimTime>(sc_.transport.timeout_factor * static_cast<double>(rtt));
    }

    // -- DCC ----------------------------------------------------------------

    control::DccEndpoint& endpoint(const std::string& id) {
        if (id == "controller")
            return ctrl_->dcc();
        return *nodes_[node_idx_.at(id)].dcc;
    }

    SimTime dcc_delay(const control::DccMessage& msg) {
        SimTime d = 10'000;
        if (msg.to != "controller")
            d = std::max(d, nodes_[node_idx_.at(msg.to)].dcc_delay_ns);
        if (msg.from != "controller")
            d = std::max(d, nodes_[node_idx_.at(msg.from)].dcc_delay_ns);
        return d;
    }

    void dcc_send(const control::DccMessage& msg) {
        const SimTime delay = dcc_delay(msg);
        const bool lost = sc_.dcc_loss_rate > 0 && unit_(rng_) < sc_.dcc_loss_rate;
        if (!lost) {
            auto copy = msg;
            q_.schedule(q_.now() + delay, [this, copy] { dcc_deliver(copy); });
        }
        if (msg.kind == control::MsgKind::Ack)
            return; // acks are fire-and-forget
        // at-least-once: retransmit while unacked
        const auto key = std::make_pair(msg.to, msg.seq);
        auto copy = msg;
        q_.schedule(q_.now() + 4 * delay + 100'000, [this, copy, key] {
            auto& ep = endpoint(copy.from);
            for (const auto& m : ep.unacked()) {
                if (m.to == copy.to && m.seq == copy.seq) {
                    if (++dcc_attempts_[key] < kDccMaxAttempts)
                        dcc_send(copy);
                    return;
                }
            }
        });
    }

    void dcc_deliver(const control::DccMessage& msg) {
        if (msg.kind == control::MsgKind::Ack) {
            const auto seq = std::get<control::AckBody>(msg.body).acked_seq;
            if (msg.to == "controller")
                ctrl_->on_dcc_ack(msg.from, seq);
            else
                endpoint(msg.to).on_ack(msg.from, seq);
            return;
        }
        auto& ep = endpoint(msg.to);
        const auto deliverable = ep.accept(msg);
        dcc_send(ep.make_ack(msg.from, msg.seq));
        for (const auto& m : deliverable) {
            if (m.to == "controller")
                handle_ctrl_msg(m);
            else
                handle_node_msg(nodes_[node_idx_.at(m.to)], m);
        }
    }

    void handle_ctrl_msg(const control::DccMessage& m) {
        switch (m.kind) {
        case control::MsgKind::TelemetryReport:
            ctrl_->on_telemetry(std::get<control::TelemetryBody>(m.body), q_.now());
            break;
        case control::MsgKind::ProbeResult:
            ctrl_->on_probe_result(std::get<control::ProbeResultBody>(m.body), q_.now());
            ctrl_->evaluate_alarms(q_.now());
            break;
        default:
            break;
        }
    }

    void handle_node_msg(NodeRt& n, const control::DccMessage& m) {
        switch (m.kind) {
        case control::MsgKind::InstallEntry:
            n.table().install(std::get<control::InstallEntryBody>(m.body).entry);
            break;
        case control::MsgKind::RemoveEntry: {
            const auto& b = std::get<control::RemoveEntryBody>(m.body);
            n.table().remove(b.in_port, b.in_label);
            break;
        }
        case control::MsgKind::ProbeRequest:
            launch_probe(n, std::get<control::ProbeRequestBody>(m.body).link);
            break;
        case control::MsgKind::TransportAck:
            on_transport_ack(std::get<control::TransportAckBody>(m.body));
            break;
        default:
            break;
        }
    }

    // -- periodic controller work -------------------------------------------

    void start_periodics() {
        const SimTime probe_ns = static_cast<SimTime>(sc_.probe_period_s * kSToNs);
        if (probe_ns > 0 && probe_ns <= duration_ns_)
            q_.schedule(probe_ns, [this, probe_ns] { probe_tick(probe_ns); });
        if (duration_ns_ >= kSToNs)
            q_.schedule(kSToNs, [this] { housekeeping_tick(); });
    }

    void probe_tick(SimTime period) {
        for (const auto& link : ctrl_->link_ids()) {
            const auto msg = ctrl_->dcc().stamp(ctrl_->link_src(link),
                                                control::MsgKind::ProbeRequest,
                                                control::ProbeRequestBody{link, 0});
            dcc_send(msg);
        }
        if (q_.now() + period <= duration_ns_)
            q_.schedule(q_.now() + period, [this, period] { probe_tick(period); });
    }

    void housekeeping_tick() {
        for (const auto& msg : ctrl_->poll(q_.now()))
            dcc_send(msg);
        ctrl_->evaluate_alarms(q_.now());
        if (q_.now() + kSToNs <= duration_ns_)
            q_.schedule(q_.now() + kSToNs, [this] { housekeeping_tick(); });
    }

    // -- clients & transport --------------------------------------------------

    void start_clients() {
        for (std::size_t ci = 0; ci < circuits_.size(); ++ci)
            q_.schedule(2'000'000, [this, ci] { client_start_check(ci); });
    }

    void client_start_check(std::size_t ci) {
        CircuitRt& c = circuits_[ci];
        if (ctrl_->circuit_status(c.spec.circuit_id) == control::CircuitStatus::up) {
            c.started = true;
            c.window = std::make_unique<transport::SenderWindow>(
                sc_.transport.window, c.timeout_ns, sc_.transport.max_retries);
            schedule_next_request(ci);
            return;
        }
        if (q_.now() + 10'000'000 <= std::max(duration_ns_, SimTime{100'000'000}))
            q_.schedule(q_.now() + 10'000'000, [this, ci] { client_start_check(ci); });
    }

    void schedule_next_request(std::size_t ci) {
        CircuitRt& c = circuits_[ci];
        if (c.issued >= c.spec.demand)
            return;
        const SimTime gap = c.spec.rate_hz > 0
                                ? static_cast<SimTime>(kSToNs / c.spec.rate_hz)
                                : period_ns_;
        q_.schedule(q_.now() + gap, [this, ci] {
            CircuitRt& cc = circuits_[ci];
            ++cc.issued;
            cc.pending.push_back(Meta{++next_request_, 0});
            try_send(ci);
            schedule_next_request(ci);
        });
    }

    void try_send(std::size_t ci) {
        CircuitRt& c = circuits_[ci];
        while (!c.pending.empty()) {
            const Meta m = c.pending.front();
            if (!launch_datagram(ci, m))
                break;
            c.pending.pop_front();
        }
    }

    bool launch_datagram(std::size_t ci, const Meta& m) {
        CircuitRt& c = circuits_[ci];
        if (c.window->in_flight() >= c.window->window_size())
            return false;

        const node::PayloadId pid = ++next_payload_;
        node::ClientRequest req;
        req.dst = c.spec.dst;
        auto dg = nodes_[c.src_idx].edge->ingress(req, pid);
        if (!dg)
            return false;

        const auto fields = codec::decode_header(dg.value().header_bits).value();
        if (c.window->send(pid, m.rid, fields, q_.now(), m.retries) !=
            transport::SendResult::Accepted)
            return false;
        c.window_ok &= c.window->in_flight() <= c.window->window_size();
        c.meta[pid] = m;
        payload_circuit_[pid] = ci;
        ++rep_.ledger.ingress_sent;
        ++rep_.ledger.in_flight;

        q_.schedule(q_.now() + c.timeout_ns, [this, ci, pid] { timeout_event(ci, pid); });

        // The ingress edge forwards by its own table like any other hop.
        auto flight = std::make_shared<Flight>();
        flight->dg = std::move(dg.value());
        flight->circuit_idx = ci;
        const auto entry =
            nodes_[c.src_idx].edge->table().lookup(node::kLocalPort, c.spec.circuit_id);
        if (!entry) {
            drop_flight(*flight); // circuit vanished mid-flight; counted drop
            return true;
        }
        flight->dg.header_bits =
            codec::swap_label(flight->dg.header_bits, entry->out_label).value();
        flight->dg.tail_bits = codec::encode_tail(flight->dg.header_bits);
        flight->trace.push_back({nodes_[c.src_idx].id, entry->out_label});
        transmit(c.src_idx, entry->out_port, flight, q_.now() + header_ns_);
        return true;
    }

    void relaunch(std::size_t ci, transport::RequestId rid, int retries) {
        CircuitRt& c = circuits_[ci];
        const Meta m{rid, retries};
        if (!launch_datagram(ci, m))
            c.pending.push_front(m);
    }

    void timeout_event(std::size_t ci, node::PayloadId pid) {
        CircuitRt& c = circuits_[ci];
        if (!c.started)
            return;
        const auto it = c.meta.find(pid);
        const Meta m = it != c.meta.end() ? it->second : Meta{};
        switch (c.window->on_timeout(pid, q_.now())) {
        case transport::TimeoutAction::Regenerate:
            c.meta.erase(pid);
            relaunch(ci, m.rid, m.retries + 1);
            break;
        case transport::TimeoutAction::GiveUp:
            c.meta.erase(pid);
            c.gave_up_requests.insert(m.rid);
            break;
        case transport::TimeoutAction::Stale:
            break;
        }
        try_send(ci);
    }

    void on_transport_ack(const control::TransportAckBody& b) {
        const auto it = payload_circuit_.find(b.payload_id);
        if (it == payload_circuit_.end())
            return;
        CircuitRt& c = circuits_[it->second];
        if (b.positive) {
            if (c.window->on_ack(b.payload_id)) {
                const Meta m = c.meta[b.payload_id];
                c.meta.erase(b.payload_id);
                c.delivered_requests.insert(m.rid);
            }
        } else {
            if (c.window->on_nack(b.payload_id)) {
                const Meta m = c.meta[b.payload_id];
                c.meta.erase(b.payload_id);
                if (c.window->next_action(m.retries) == transport::TimeoutAction::Regenerate) {
                    c.window->count_regenerated();
                    relaunch(it->second, m.rid, m.retries + 1);
                } else {
                    c.window->count_gave_up();
                    c.gave_up_requests.insert(m.rid);
                }
            }
        }
        try_send(it->second);
    }

    // -- data plane -----------------------------------------------------------

    void maybe_corrupt(node::QwDatagram& dg) {
        if (sc_.header_loss_rate > 0 && unit_(rng_) < sc_.header_loss_rate) {
            const auto bit = static_cast<std::size_t>(unit_(rng_) * codec::kHeaderBits) %
                             codec::kHeaderBits;
            dg.header_bits[bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit % 8));
        }
    }

    void transmit(std::size_t from_idx, int out_port, std::shared_ptr<Flight> fl,
                  SimTime depart) {
        const auto pit = nodes_[from_idx].ports.find(out_port);
        if (pit == nodes_[from_idx].ports.end()) {
            drop_flight(*fl);
            return;
        }
        const PortRef ref = pit->second;
        maybe_corrupt(fl->dg);
        fl->dg.payload.accumulated_channel =
            photonics::compose(fl->dg.payload.accumulated_channel, links_[ref.link_idx].channel);
        const SimTime arrival = depart + link_prop_ns_[ref.link_idx] + header_ns_;
        const std::size_t to_idx = ref.node_idx;
        const int in_port = link_port_.at(std::make_pair(ref.link_idx, to_idx));
        q_.schedule(arrival, [this, to_idx, in_port, fl, from_idx, li = ref.link_idx] {
            arrive(to_idx, in_port, fl, from_idx, li);
        });
    }

    double jittered(double ber) {
        if (sc_.telemetry_jitter_sigma <= 0)
            return ber;
        std::normal_distribution<double> n(0.0, sc_.telemetry_jitter_sigma);
        return ber * std::exp(n(rng_));
    }

    void send_telemetry(std::size_t node_idx, std::size_t from_idx, std::size_t link_idx) {
        const auto link = control::Controller::link_id(nodes_[from_idx].id, nodes_[node_idx].id);
        const double rx = sc_.launch_dbm - links_[link_idx].channel.attenuation_db;
        const double sample = jittered(photonics::header_ber(rx, cal_.receiver));
        auto& series = rep_.link_series[link];
        if (series.size() < kMaxLinkSamples)
            series.push_back(LinkSample{q_.now(), sample, rx});
        dcc_send(nodes_[node_idx].dcc->stamp("controller", control::MsgKind::TelemetryReport,
                                             control::TelemetryBody{link, sample, rx}));
    }

    void drop_flight(const Flight& fl) {
        if (fl.is_probe)
            return;
        ++rep_.ledger.dropped;
        --rep_.ledger.in_flight;
    }

    void arrive(std::size_t to_idx, int in_port, std::shared_ptr<Flight> fl,
                std::size_t from_idx, std::size_t link_idx) {
        NodeRt& n = nodes_[to_idx];
        send_telemetry(to_idx, from_idx, link_idx);

        if (fl->is_probe) {
            if (codec::decode_header(fl->dg.header_bits))
                q_.schedule(q_.now() + payload_ns_,
                            [this, to_idx, fl] { measure_probe(to_idx, *fl); });
            // corrupted probe header: ProbeLost, no result
            return;
        }

        if (!n.is_edge) {
            auto result = n.core->process_datagram(in_port, fl->dg, q_.now());
            if (auto* fd = std::get_if<node::ForwardDecision>(&result)) {
                fl->dg = fd->datagram;
                fl->trace.push_back(
                    {n.id, codec::decode_header(fl->dg.header_bits).value().circuit_id});
                transmit(to_idx, fd->out_port, fl, fd->depart_time_ns);
            } else {
                drop_flight(*fl);
            }
            return;
        }

        // Egress edge: the full datagram (payload + tail) must land before
        // the classical decision is made.
        q_.schedule(q_.now() + payload_ns_,
                    [this, to_idx, in_port, fl] { egress_process(to_idx, in_port, *fl); });
    }

    void egress_process(std::size_t edge_idx, int in_port, Flight& fl) {
        NodeRt& n = nodes_[edge_idx];
        const auto header = codec::decode_header(fl.dg.header_bits);
        const bool tail_ok =
            codec::decode_tail(fl.dg.tail_bits, fl.dg.header_bits).ok();
        const auto ack =
            transport::on_egress_header(header, tail_ok, fl.dg.payload.payload_id);

        auto delivered = n.edge->egress(in_port, fl.dg, audit_);
        if (ack.kind == transport::AckMessage::Kind::ACK && delivered) {
            ++rep_.ledger.delivered;
            --rep_.ledger.in_flight;
            fl.trace.push_back({n.id, header.value().circuit_id});
            if (rep_.delivered_label_traces.size() < kMaxStoredTraces)
                rep_.delivered_label_traces.push_back(fl.trace);
            const auto key = std::make_pair(n.id, header.value().circuit_id);
            if (auto it = egress_label_.find(key); it != egress_label_.end()) {
                CircuitRt& c = circuits_[it->second];
                if (!c.egress_seen.insert(fl.dg.payload.payload_id).second)
                    c.dup_payload = true;
                c.last_metrics = delivered.value().measured;
            }
        } else {
            drop_flight(fl);
        }
        // ACK/NACK rides the out-of-band channel back to the ingress edge.
        if (fl.circuit_idx < circuits_.size()) {
            const CircuitRt& c = circuits_[fl.circuit_idx];
            control::TransportAckBody body;
            body.positive = ack.kind == transport::AckMessage::Kind::ACK && delivered.ok();
            body.circuit_id = ack.circuit_id;
            body.payload_id = ack.payload_id;
            body.nack_reason = static_cast<int>(ack.reason);
            dcc_send(n.dcc->stamp(nodes_[c.src_idx].id, control::MsgKind::TransportAck, body));
        }
    }

    void launch_probe(NodeRt& n, const control::LinkId& link) {
        const auto& dst = ctrl_->link_dst(link);
        const std::size_t from_idx = node_idx_.at(n.id);
        for (const auto& [port, ref] : nodes_[from_idx].ports) {
            if (nodes_[ref.node_idx].id != dst)
                continue;
            auto fl = std::make_shared<Flight>();
            fl->is_probe = true;
            fl->probe_link = link;
            codec::HeaderFields f;
            f.cls = codec::QwClass::B;
            f.circuit_id = 0;
            f.payload_duration_us = static_cast<std::uint32_t>(sc_.duty.payload_us);
            fl->dg.header_bits = codec::encode_header(f).value();
            fl->dg.tail_bits = codec::encode_tail(fl->dg.header_bits);
            fl->dg.payload.empty = true;
            fl->dg.payload.duration_us = f.payload_duration_us;
            transmit(from_idx, port, fl, q_.now() + header_ns_);
            return;
        }
    }

    void measure_probe(std::size_t at_idx, const Flight& fl) {
        // Photon counting over the empty payload window, Poisson-sampled.
        const auto& ch = fl.dg.payload.accumulated_channel;
        const double rate = photonics::payload_slot_noise_rate(
            cal_.source, cal_.detector, ch, sc_.header_mode, sc_.launch_dbm);
        const double window_s = sc_.duty.payload_us * 1e-6;
        const double expected = (rate + cal_.detector.dark_count_rate_hz) * window_s;
        std::poisson_distribution<long long> poisson(expected);
        const double counts = static_cast<double>(poisson(rng_));
        const double measured =
            std::max(0.0, counts / window_s - cal_.detector.dark_count_rate_hz);
        control::ProbeResultBody body{fl.probe_link, measured,
                                      sc_.launch_dbm - ch.attenuation_db};
        dcc_send(nodes_[at_idx].dcc->stamp("controller", control::MsgKind::ProbeResult, body));
    }

    // -- sweeps ---------------------------------------------------------------

    void run_sweeps() {
        if (sc_.sweep_attenuations_db.empty() && sc_.mode_sweep.empty())
            return;
        photonics::ChannelState base;
        if (!sc_.topology.links.empty())
            base = sc_.topology.links.front().channel;
        const std::vector<photonics::HeaderMode> modes =
            sc_.mode_sweep.empty() ? std::vector{sc_.header_mode} : sc_.mode_sweep;
        const std::vector<double> atts = sc_.sweep_attenuations_db.empty()
                                             ? std::vector{base.attenuation_db}
                                             : sc_.sweep_attenuations_db;
        std::uint64_t mc_seed = sc_.seed;
        for (const auto mode : modes) {
            const auto metrics = photonics::car_vs_attenuation_sweep(
                cal_.source, cal_.detector, base, cal_.receiver, mode, sc_.launch_dbm,
                sc_.duty, sc_.integration_s, atts);
            for (const auto& m : metrics) {
                SweepRow row;
                row.mode = mode;
                row.metrics = m;
                if (sc_.monte_carlo) {
                    photonics::ChannelState ch = base;
                    ch.attenuation_db = m.attenuation_db;
                    row.monte_carlo = photonics::monte_carlo_coincidences(
                        cal_.source, cal_.detector, ch, mode, sc_.launch_dbm, sc_.duty,
                        sc_.mc_integration_s, ++mc_seed);
                }
                rep_.sweep.push_back(std::move(row));
            }
        }
    }

    // -- wrap-up --------------------------------------------------------------

    void finalize() {
        rep_.end_time_ns = q_.now();
        for (const auto& n : nodes_) {
            rep_.node_counters[n.id] = n.counters();
            rep_.node_tables[n.id] =
                n.is_edge ? n.edge->table().dump() : n.core->table().dump();
        }
        for (const auto& [link, state] : ctrl_->link_states()) {
            LinkStateDump d;
            d.latest_ber = state.latest.header_ber;
            d.rx_power_dbm = state.latest.received_power_dbm;
            d.inferred = state.inferred;
            d.probe_noise_rate_hz = state.probe_noise_rate_hz;
            d.alarm = state.alarm;
            rep_.link_states[link] = d;
        }
        rep_.alarms = ctrl_->alarm_log();
        rep_.audit_violations = audit_.violations();

        for (const auto& n : nodes_) {
            auto intended = ctrl_->intended_table(n.id);
            auto actual = rep_.node_tables[n.id];
            auto key = [](const node::ForwardingEntry& e) {
                return std::tuple(e.in_port, e.in_label, e.out_port, e.out_label);
            };
            std::sort(intended.begin(), intended.end(),
                      [&](auto& a, auto& b) { return key(a) < key(b); });
            std::sort(actual.begin(), actual.end(),
                      [&](auto& a, auto& b) { return key(a) < key(b); });
            if (intended != actual)
                rep_.tables_converged = false;
        }

        for (const auto& c : circuits_) {
            CircuitReport cr;
            cr.circuit_id = c.spec.circuit_id;
            cr.src = c.spec.src;
            cr.dst = c.spec.dst;
            cr.requests_issued = c.issued;
            cr.requests_delivered = c.delivered_requests.size();
            cr.requests_gave_up = c.gave_up_requests.size();
            if (c.window)
                cr.stats = c.window->stats();
            cr.window_bound_ok = c.window_ok;
            cr.duplicate_delivery = c.dup_payload;
            cr.last_delivery_metrics = c.last_metrics;
            rep_.circuits.push_back(cr);
        }
    }

    Scenario sc_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    photonics::Calibration cal_;
    EventQueue q_;

    std::vector<NodeRt> nodes_;
    std::map<std::string, std::size_t> node_idx_;
    std::vector<LinkSpec> links_;
    std::vector<SimTime> link_prop_ns_;
    std::map<std::pair<std::size_t, std::size_t>, int> link_port_; // (link, node) -> port
    std::unique_ptr<control::Controller> ctrl_;
    std::vector<CircuitRt> circuits_;
    std::map<std::pair<std::string, std::uint32_t>, std::size_t> egress_label_;
    std::map<node::PayloadId, std::size_t> payload_circuit_;
    std::map<std::pair<std::string, std::uint64_t>, int> dcc_attempts_;
    node::MeasurementAudit audit_;
    node::PayloadId next_payload_ = 0;
    transport::RequestId next_request_ = 0;
    Report rep_;

    SimTime duration_ns_ = 0;
    SimTime header_ns_ = 0;
    SimTime payload_ns_ = 0;
    SimTime period_ns_ = 0;
};

} // namespace

Report run(const Scenario& s) {
    validate(s);
    Runner runner(s);
    return runner.run();
}

// ---------------------------------------------------------------------------
// Export

namespace {

Json stats_json(const photonics::CoincidenceStats& s) {
    return {{"cc", s.cc_total},
            {"ac", s.accidentals},
            {"car_linear", s.car_unbounded ? Json(nullptr) : Json(s.car_linear)},
            {"car_db", s.car_unbounded ? Json(nullptr) : Json(s.car_db)},
            {"car_unbounded", s.car_unbounded},
            {"integration_s", s.integration_s}};
}

Json band_json(const control::CarBand& b) {
    return {{"lo_db", b.lo_db},
            {"hi_db", b.open_ended ? Json(nullptr) : Json(b.hi_db)},
            {"open_ended", b.open_ended}};
}

} // namespace

Json report_to_json(const Report& r) {
    Json j;
    j["scenario"] = r.scenario_name;
    j["seed"] = r.seed;
    j["end_time_ns"] = r.end_time_ns;

    Json sweep = Json::array();
    for (const auto& row : r.sweep) {
        Json s;
        s["mode"] = photonics::to_string(row.mode);
        s["attenuation_db"] = row.metrics.attenuation_db;
        s["rx_dbm"] = row.metrics.received_power_dbm;
        s["ber"] = row.metrics.header_ber;
        s["stats"] = stats_json(row.metrics.stats);
        if (row.monte_carlo)
            s["monte_carlo"] = stats_json(*row.monte_carlo);
        sweep.push_back(std::move(s));
    }
    j["sweep"] = sweep;

    Json circuits = Json::array();
    for (const auto& c : r.circuits) {
        circuits.push_back(
            {{"circuit_id", c.circuit_id},
             {"src", c.src},
             {"dst", c.dst},
             {"requests_issued", c.requests_issued},
             {"requests_delivered", c.requests_delivered},
             {"requests_gave_up", c.requests_gave_up},
             {"transport",
              {{"sent", c.stats.sent},
               {"delivered", c.stats.delivered},
               {"regenerated", c.stats.regenerated},
               {"gave_up", c.stats.gave_up},
               {"duplicate_acks", c.stats.duplicate_acks}}},
             {"window_bound_ok", c.window_bound_ok},
             {"duplicate_payload_accepted", c.duplicate_delivery}});
    }
    j["circuits"] = circuits;

    Json counters = Json::object();
    for (const auto& [id, c] : r.node_counters)
        counters[id] = {{"forwarded", c.forwarded},
                        {"dropped_no_route", c.dropped_no_route},
                        {"dropped_reserved_class", c.dropped_reserved_class},
                        {"dropped_corrupt", c.dropped_corrupt}};
    j["node_counters"] = counters;

    Json tables = Json::object();
    for (const auto& [id, entries] : r.node_tables) {
        Json arr = Json::array();
        for (const auto& e : entries)
            arr.push_back({{"in_port", e.in_port},
                           {"in_label", e.in_label},
                           {"out_port", e.out_port},
                           {"out_label", e.out_label}});
        tables[id] = arr;
    }
    j["node_tables"] = tables;

    Json links = Json::object();
    for (const auto& [id, s] : r.link_states) {
        Json l;
        l["latest_ber"] = s.latest_ber;
        l["rx_power_dbm"] = s.rx_power_dbm;
        l["inferred_car_band"] = s.inferred ? band_json(*s.inferred) : Json(nullptr);
        l["probe_noise_rate_hz"] =
            s.probe_noise_rate_hz ? Json(*s.probe_noise_rate_hz) : Json(nullptr);
        l["alarm"] = control::to_string(s.alarm);
        links[id] = l;
    }
    j["link_states"] = links;

    Json series = Json::object();
    for (const auto& [id, samples] : r.link_series) {
        Json arr = Json::array();
        for (const auto& s : samples)
            arr.push_back({{"t_ns", s.time_ns}, {"ber", s.ber}, {"rx_dbm", s.rx_dbm}});
        series[id] = arr;
    }
    j["link_series"] = series;

    Json alarms = Json::array();
    for (const auto& a : r.alarms)
        alarms.push_back(
            {{"t_ns", a.time_ns}, {"link", a.link}, {"alarm", control::to_string(a.alarm)}});
    j["alarms"] = alarms;

    j["ledger"] = {{"ingress_sent", r.ledger.ingress_sent},
                   {"delivered", r.ledger.delivered},
                   {"dropped", r.ledger.dropped},
                   {"in_flight", r.ledger.in_flight},
                   {"balanced", r.ledger.balanced()}};
    j["audit_violations"] = r.audit_violations;
    j["tables_converged"] = r.tables_converged;

    Json traces = Json::array();
    for (const auto& t : r.delivered_label_traces) {
        Json arr = Json::array();
        for (const auto& hop : t)
            arr.push_back({{"node", hop.node}, {"out_label", hop.out_label}});
        traces.push_back(std::move(arr));
    }
    j["delivered_label_traces"] = traces;
    return j;
}

Json alarms_to_json(const Report& r) {
    Json j;
    Json arr = Json::array();
    for (const auto& a : r.alarms)
        arr.push_back(
            {{"t_ns", a.time_ns}, {"link", a.link}, {"alarm", control::to_string(a.alarm)}});
    j["alarms"] = arr;
    Json current = Json::object();
    for (const auto& [id, s] : r.link_states)
        current[id] = control::to_string(s.alarm);
    j["current"] = current;
    return j;
}

std::string metrics_csv(const Report& r) {
    std::string out = "attenuation_db,rx_dbm,ber,cc,ac,car_db,mode\n";
    for (const auto& row : r.sweep) {
        out += fmt(row.metrics.attenuation_db) + "," + fmt(row.metrics.received_power_dbm) +
               "," + fmt(row.metrics.header_ber) + "," + fmt(row.metrics.stats.cc_total) + "," +
               fmt(row.metrics.stats.accidentals) + "," +
               (row.metrics.stats.car_unbounded ? "inf" : fmt(row.metrics.stats.car_db)) + "," +
               photonics::to_string(row.mode) + "\n";
    }
    return out;
}

void export_report(const Report& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/metrics.csv", std::ios::binary);
        f << metrics_csv(r);
    }
    {
        std::ofstream f(dir + "/report.json", std::ios::binary);
        f << report_to_json(r).dump(2) << "\n";
    }
    {
        std::ofstream f(dir + "/alarms.json", std::ios::binary);
        f << alarms_to_json(r).dump(2) << "\n";
    }
}

std::vector<std::string> check_report(const Report& r) {
    std::vector<std::string> problems;
    if (!r.ledger.balanced())
        problems.push_back("conservation ledger does not balance");
    if (!r.audit_violations.empty())
        problems.push_back("payload measurement audit recorded violations");
    if (!r.tables_converged)
        problems.push_back("node tables diverge from controller intent");
    for (const auto& c : r.circuits) {
        if (!c.window_bound_ok)
            problems.push_back("window bound violated on circuit " +
                               std::to_string(c.circuit_id));
        if (c.duplicate_delivery)
            problems.push_back("duplicate payload accepted on circuit " +
                               std::to_string(c.circuit_id));
    }
    // per-mode monotone shape along the attenuation sweep
    std::map<std::string, std::pair<double, double>> last; // mode -> (ber, car)
    for (const auto& row : r.sweep) {
        const std::string mode = photonics::to_string(row.mode);
        const double ber = row.metrics.header_ber;
        const double car = row.metrics.stats.car_unbounded
                               ? std::numeric_limits<double>::infinity()
                               : row.metrics.stats.car_db;
        if (auto it = last.find(mode); it != last.end()) {
            if (ber < it->second.first - 1e-15)
                problems.push_back("BER not nondecreasing along sweep (" + mode + ")");
            if (car > it->second.second + 1e-9)
                problems.push_back("CAR not nonincreasing along sweep (" + mode + ")");
        }
        last[mode] = {ber, car};
    }
    return problems;
}

Json calibration_to_json(const photonics::Calibration& cal) {
    Json j;
    j["anchors"] = {{"car_none_db", cal.anchors.car_none_db},
                    {"car_continuous_db", cal.anchors.car_continuous_db},
                    {"car_burst_db", cal.anchors.car_burst_db},
                    {"launch_dbm", cal.anchors.launch_dbm},
                    {"wdm_crosstalk_db", cal.anchors.wdm_crosstalk_db},
                    {"coincidence_window_ns", cal.anchors.coincidence_window_ns},
                    {"heralding_efficiency", cal.anchors.heralding_efficiency},
                    {"dark_count_rate_hz", cal.anchors.dark_count_rate_hz}};
    j["source"] = {{"pair_rate_hz", cal.source.pair_rate_hz},
                   {"signal_wavelength_nm", cal.source.signal_wavelength_nm},
                   {"header_wavelength_nm", cal.source.header_wavelength_nm},
                   {"signal_bandwidth_nm", cal.source.signal_bandwidth_nm},
                   {"heralding_efficiency_signal", cal.source.heralding_efficiency_signal},
                   {"heralding_efficiency_idler", cal.source.heralding_efficiency_idler}};
    j["detector"] = {{"efficiency", cal.detector.efficiency},
                     {"dark_count_rate_hz", cal.detector.dark_count_rate_hz},
                     {"coincidence_window_ns", cal.detector.coincidence_window_ns},
                     {"gated", cal.detector.gated},
                     {"gate_extinction_db", cal.detector.gate_extinction_db}};
    j["receiver"] = {{"sensitivity_dbm", cal.receiver.sensitivity_dbm},
                     {"noise_slope", cal.receiver.noise_slope}};
    return j;
}

} // namespace qw::sim
