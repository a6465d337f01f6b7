#include "qwire/transport.hpp"

namespace qw::transport {

AckMessage on_egress_header(const Expected<codec::HeaderFields, codec::CodecFailure>& header,
                            bool tail_ok, node::PayloadId payload_id_echo) {
    AckMessage msg;
    msg.payload_id = payload_id_echo;
    if (!header || !tail_ok) {
        msg.kind = AckMessage::Kind::NACK;
        msg.reason = NackReason::checksum;
        if (header)
            msg.circuit_id = header.value().circuit_id;
        return msg;
    }
    const codec::HeaderFields& f = header.value();
    msg.circuit_id = f.circuit_id;
    if (f.reserved_class()) {
        msg.kind = AckMessage::Kind::NACK;
        msg.reason = NackReason::reserved;
        return msg;
    }
    msg.kind = AckMessage::Kind::ACK;
    return msg;
}

SenderWindow::SenderWindow(std::size_t window_size, node::SimTimeNs timeout_ns, int max_retries)
    : window_size_(window_size), timeout_ns_(timeout_ns), max_retries_(max_retries) {}

SendResult SenderWindow::send(node::PayloadId id, RequestId request,
                              const codec::HeaderFields& header, node::SimTimeNs now_ns,
                              int retries_so_far) {
    if (outstanding_.size() >= window_size_)
        return SendResult::WindowFull;
    outstanding_[id] = Outstanding{request, header, now_ns, retries_so_far};
    ++stats_.sent;
    return SendResult::Accepted;
}

bool SenderWindow::on_ack(node::PayloadId id) {
    auto it = outstanding_.find(id);
    if (it == outstanding_.end()) {
        ++stats_.duplicate_acks;
        return false;
    }
    outstanding_.erase(it);
    ++stats_.delivered;
    return true;
}

bool SenderWindow::on_nack(node::PayloadId id) {
    return outstanding_.erase(id) > 0;
}

TimeoutAction SenderWindow::on_timeout(node::PayloadId id, node::SimTimeNs now_ns) {
    auto it = outstanding_.find(id);
    if (it == outstanding_.end())
        return TimeoutAction::Stale; // late ACK or NACK already handled it
    if (now_ns - it->second.send_time_ns < timeout_ns_)
        return TimeoutAction::Stale; // re-armed timer from an old send
    const int retries = it->second.retries;
    outstanding_.erase(it);
    if (retries < max_retries_) {
        ++stats_.regenerated;
        return TimeoutAction::Regenerate;
    }
    ++stats_.gave_up;
    return TimeoutAction::GiveUp;
}

TimeoutAction SenderWindow::next_action(int retries_so_far) const {
    return retries_so_far < max_retries_ ? TimeoutAction::Regenerate : TimeoutAction::GiveUp;
}

bool SenderWindow::outstanding(node::PayloadId id) const { return outstanding_.count(id) > 0; }

const Outstanding* SenderWindow::entry(node::PayloadId id) const {
    auto it = outstanding_.find(id);
    return it == outstanding_.end() ? nullptr : &it->second;
}

} // namespace qw::transport
