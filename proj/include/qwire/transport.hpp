#ifndef QWIRE_TRANSPORT_HPP
#define QWIRE_TRANSPORT_HPP

#include <cstdint>
#include <map>

#include "qwire/codec.hpp"
#include "qwire/expected.hpp"
#include "qwire/node.hpp"

// Header-based sliding-window reliability. ACK/NACK is decided from
// classical header/tail validation alone; a "retransmission" regenerates a
// fresh quantum payload (no-cloning: the old one is gone, not copied).

namespace qw::transport {

using RequestId = std::uint64_t;

enum class NackReason { checksum, reserved, no_route_reported };

struct AckMessage {
    enum class Kind { ACK, NACK } kind = Kind::ACK;
    std::uint32_t circuit_id = 0;
    node::PayloadId payload_id = 0; // classical echo token
    NackReason reason = NackReason::checksum;
};

// Builds the egress feedback from classical decode results only; no payload
// descriptor ever reaches this function.
AckMessage on_egress_header(const Expected<codec::HeaderFields, codec::CodecFailure>& header,
                            bool tail_ok, node::PayloadId payload_id_echo);

struct Outstanding {
    RequestId request_id = 0;
    codec::HeaderFields header;
    node::SimTimeNs send_time_ns = 0;
    int retries = 0;
};

enum class SendResult { Accepted, WindowFull };
enum class TimeoutAction { Regenerate, GiveUp, Stale };

struct TransportStats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t regenerated = 0;
    std::uint64_t gave_up = 0;
    std::uint64_t duplicate_acks = 0;
};

class SenderWindow {
public:
    SenderWindow(std::size_t window_size, node::SimTimeNs timeout_ns, int max_retries);

    SendResult send(node::PayloadId id, RequestId request, const codec::HeaderFields& header,
                    node::SimTimeNs now_ns, int retries_so_far = 0);

    // ACK slides the window; a duplicate or stale ACK is counted and ignored.
    bool on_ack(node::PayloadId id);
    // NACK frees the slot immediately; caller decides regenerate vs give up
    // via next_action().
    bool on_nack(node::PayloadId id);

    TimeoutAction on_timeout(node::PayloadId id, node::SimTimeNs now_ns);
    // Same policy as on_timeout but for an entry already removed by a NACK.
    TimeoutAction next_action(int retries_so_far) const;

    bool outstanding(node::PayloadId id) const;
    const Outstanding* entry(node::PayloadId id) const;
    std::size_t in_flight() const { return outstanding_.size(); }
    std::size_t window_size() const { return window_size_; }
    node::SimTimeNs timeout_ns() const { return timeout_ns_; }
    const TransportStats& stats() const { return stats_; }
    void count_gave_up() { ++stats_.gave_up; }
    void count_regenerated() { ++stats_.regenerated; }

private:
    std::size_t window_size_;
    node::SimTimeNs timeout_ns_;
    int max_retries_;
    std::map<node::PayloadId, Outstanding> outstanding_;
    TransportStats stats_;
};

} // namespace qw::transport

#endif
