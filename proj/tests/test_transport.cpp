#include "doctest.h"

#include "qwire/transport.hpp"

using namespace qw;
using namespace qw::transport;

namespace {

codec::HeaderFields sample_header(std::uint32_t label = 7) {
    codec::HeaderFields f;
    f.circuit_id = label;
    f.payload_duration_us = 1130;
    return f;
}

Expected<codec::HeaderFields, codec::CodecFailure> good_header(std::uint32_t label = 7) {
    return sample_header(label);
}

Expected<codec::HeaderFields, codec::CodecFailure> bad_header() {
    return codec::CodecFailure{codec::CodecError::ChecksumMismatch, {}};
}

} // namespace

TEST_CASE("egress feedback maps decode results to ACK/NACK") {
    const auto ack = on_egress_header(good_header(7), true, 42);
    CHECK(ack.kind == AckMessage::Kind::ACK);
    CHECK(ack.circuit_id == 7);
    CHECK(ack.payload_id == 42);

    const auto nack_hdr = on_egress_header(bad_header(), true, 43);
    CHECK(nack_hdr.kind == AckMessage::Kind::NACK);
    CHECK(nack_hdr.reason == NackReason::checksum);
    CHECK(nack_hdr.payload_id == 43);

    const auto nack_tail = on_egress_header(good_header(7), false, 44);
    CHECK(nack_tail.kind == AckMessage::Kind::NACK);
    CHECK(nack_tail.reason == NackReason::checksum);

    codec::HeaderFields reserved = sample_header(9);
    reserved.cls = codec::QwClass::C;
    const auto nack_res = on_egress_header(
        Expected<codec::HeaderFields, codec::CodecFailure>{reserved}, true, 45);
    CHECK(nack_res.kind == AckMessage::Kind::NACK);
    CHECK(nack_res.reason == NackReason::reserved);
    CHECK(nack_res.circuit_id == 9);
}

TEST_CASE("window admits exactly window_size payloads") {
    SenderWindow w(8, 1000, 5);
    for (node::PayloadId id = 1; id <= 8; ++id)
        CHECK(w.send(id, id, sample_header(), 0) == SendResult::Accepted);
    CHECK(w.in_flight() == 8);
    CHECK(w.send(9, 9, sample_header(), 0) == SendResult::WindowFull);
    CHECK(w.stats().sent == 8);

    // an ACK frees a slot
    CHECK(w.on_ack(3));
    CHECK(w.in_flight() == 7);
    CHECK(w.send(9, 9, sample_header(), 10) == SendResult::Accepted);
    CHECK(w.in_flight() == 8);
}

TEST_CASE("duplicate and stale ACKs are counted, not acted on") {
    SenderWindow w(4, 1000, 5);
    w.send(1, 1, sample_header(), 0);
    CHECK(w.on_ack(1));
    CHECK(w.stats().delivered == 1);
    CHECK_FALSE(w.on_ack(1)); // duplicate
    CHECK_FALSE(w.on_ack(99)); // never sent
    CHECK(w.stats().duplicate_acks == 2);
    CHECK(w.stats().delivered == 1);
}

TEST_CASE("NACK frees the slot and the caller picks the next action") {
    SenderWindow w(4, 1000, 2);
    w.send(1, 1, sample_header(), 0);
    CHECK(w.on_nack(1));
    CHECK_FALSE(w.on_nack(1)); // already gone
    CHECK(w.in_flight() == 0);
    CHECK(w.next_action(0) == TimeoutAction::Regenerate);
    CHECK(w.next_action(1) == TimeoutAction::Regenerate);
    CHECK(w.next_action(2) == TimeoutAction::GiveUp);
}

TEST_CASE("timeout regenerates until max_retries, then gives up") {
    SenderWindow w(4, 1000, 2);
    w.send(1, 1, sample_header(), 0, /*retries_so_far=*/0);
    CHECK(w.on_timeout(1, 1000) == TimeoutAction::Regenerate);
    CHECK(w.in_flight() == 0);
    w.send(2, 1, sample_header(), 1000, /*retries_so_far=*/1);
    CHECK(w.on_timeout(2, 2000) == TimeoutAction::Regenerate);
    w.send(3, 1, sample_header(), 2000, /*retries_so_far=*/2);
    CHECK(w.on_timeout(3, 3000) == TimeoutAction::GiveUp);
    CHECK(w.stats().regenerated == 2);
    CHECK(w.stats().gave_up == 1);
}

TEST_CASE("timeout/ACK races resolve the same way in both orders") {
    SUBCASE("ACK first, then the stale timer fires") {
        SenderWindow w(4, 1000, 5);
        w.send(1, 1, sample_header(), 0);
        CHECK(w.on_ack(1));
        CHECK(w.on_timeout(1, 1000) == TimeoutAction::Stale);
        CHECK(w.stats().delivered == 1);
        CHECK(w.stats().regenerated == 0);
    }
    SUBCASE("timeout first, then the late ACK is a duplicate") {
        SenderWindow w(4, 1000, 5);
        w.send(1, 1, sample_header(), 0);
        CHECK(w.on_timeout(1, 1000) == TimeoutAction::Regenerate);
        CHECK_FALSE(w.on_ack(1));
        CHECK(w.stats().delivered == 0);
        CHECK(w.stats().duplicate_acks == 1);
    }
}

TEST_CASE("a timer from an old send is stale before the timeout elapses") {
    SenderWindow w(4, 1000, 5);
    w.send(1, 1, sample_header(), 500);
    CHECK(w.on_timeout(1, 900) == TimeoutAction::Stale); // only 400 ns elapsed
    CHECK(w.outstanding(1));
    CHECK(w.on_timeout(1, 1500) == TimeoutAction::Regenerate);
}

TEST_CASE("regeneration allocates a fresh payload id, never reuses the old one") {
    // The window tracks payload ids; a regenerate leaves the old id dead.
    SenderWindow w(4, 1000, 5);
    w.send(10, 1, sample_header(), 0);
    REQUIRE(w.on_timeout(10, 1000) == TimeoutAction::Regenerate);
    CHECK_FALSE(w.outstanding(10));
    w.send(11, 1, sample_header(), 1000, 1); // same request, new payload
    CHECK(w.outstanding(11));
    REQUIRE(w.entry(11) != nullptr);
    CHECK(w.entry(11)->request_id == 1);
    CHECK(w.entry(11)->retries == 1);
    CHECK(w.entry(10) == nullptr);
}
