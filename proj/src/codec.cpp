#include "qwire/codec.hpp"

#include <cstring>

namespace qw::codec {

namespace {

class BitWriter {
public:
    explicit BitWriter(std::span<std::uint8_t> buf) : buf_(buf) {}

    void put(std::uint32_t value, unsigned nbits) {
        for (unsigned i = nbits; i-- > 0;) {
            const bool bit = (value >> i) & 1u;
            if (bit)
                buf_[pos_ / 8] |= static_cast<std::uint8_t>(0x80u >> (pos_ % 8));
            ++pos_;
        }
    }

    std::size_t position() const { return pos_; }

private:
    std::span<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

    std::uint32_t get(unsigned nbits) {
        std::uint32_t v = 0;
        for (unsigned i = 0; i < nbits; ++i) {
            const bool bit = (buf_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
            v = (v << 1) | (bit ? 1u : 0u);
            ++pos_;
        }
        return v;
    }

private:
    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

std::uint16_t crc16_step(std::uint16_t crc, bool bit) {
    const bool msb = (crc & 0x8000u) != 0;
    crc = static_cast<std::uint16_t>(crc << 1);
    if (msb != bit)
        crc ^= 0x1021u;
    return crc;
}

} // namespace

const char* to_string(CodecError e) {
    switch (e) {
    case CodecError::BadLength: return "BadLength";
    case CodecError::BadPreamble: return "BadPreamble";
    case CodecError::ChecksumMismatch: return "ChecksumMismatch";
    case CodecError::FieldOverflow: return "FieldOverflow";
    case CodecError::BadEndMarker: return "BadEndMarker";
    case CodecError::HeaderMismatch: return "HeaderMismatch";
    }
    return "?";
}

std::uint16_t crc16_ccitt_bits(std::span<const std::uint8_t> bytes, std::size_t nbits) {
    std::uint16_t crc = 0xFFFFu;
    for (std::size_t i = 0; i < nbits; ++i) {
        const bool bit = (bytes[i / 8] >> (7 - i % 8)) & 1u;
        crc = crc16_step(crc, bit);
    }
    return crc;
}

std::uint16_t crc16_ccitt(std::span<const std::uint8_t> bytes) {
    return crc16_ccitt_bits(bytes, bytes.size() * 8);
}

Expected<HeaderBytes, CodecFailure> encode_header(const HeaderFields& f) {
    if (f.circuit_id > kMaxCircuitId)
        return CodecFailure{CodecError::FieldOverflow, "circuit_id"};
    if (f.priority > 7)
        return CodecFailure{CodecError::FieldOverflow, "priority"};
    if (f.payload_duration_us > kMaxDurationUs)
        return CodecFailure{CodecError::FieldOverflow, "payload_duration_us"};
    if (static_cast<unsigned>(f.entanglement) > 7)
        return CodecFailure{CodecError::FieldOverflow, "entanglement_type"};
    if (f.qos > 15)
        return CodecFailure{CodecError::FieldOverflow, "qos"};
    if (static_cast<unsigned>(f.tos) > 3)
        return CodecFailure{CodecError::FieldOverflow, "tos"};

    HeaderBytes out{};
    BitWriter w(out);
    w.put(kPreamble, 16);
    w.put(static_cast<std::uint32_t>(f.cls), 2);
    w.put(f.circuit_id, 20);
    w.put(f.priority, 3);
    w.put(f.payload_duration_us, 20);
    w.put(static_cast<std::uint32_t>(f.entanglement), 3);
    w.put(f.qos, 4);
    w.put(static_cast<std::uint32_t>(f.tos), 2);
    w.put(0, 2); // pad to a bit-70 CRC boundary
    w.put(crc16_ccitt_bits(out, kChecksummedBits), 16);
    return out;
}

Expected<HeaderFields, CodecFailure> decode_header(std::span<const std::uint8_t> bits) {
    if (bits.size() != kHeaderOctets)
        return CodecFailure{CodecError::BadLength, {}};

    BitReader r(bits);
    if (r.get(16) != kPreamble)
        return CodecFailure{CodecError::BadPreamble, {}};

    HeaderFields f;
    f.cls = static_cast<QwClass>(r.get(2));
    f.circuit_id = r.get(20);
    f.priority = static_cast<std::uint8_t>(r.get(3));
    f.payload_duration_us = r.get(20);
    f.entanglement = static_cast<EntanglementType>(r.get(3));
    f.qos = static_cast<std::uint8_t>(r.get(4));
    f.tos = static_cast<ServiceType>(r.get(2));
    const std::uint32_t pad = r.get(2);
    const std::uint16_t checksum = static_cast<std::uint16_t>(r.get(16));

    if (pad != 0 || checksum != crc16_ccitt_bits(bits, kChecksummedBits))
        return CodecFailure{CodecError::ChecksumMismatch, {}};
    return f;
}

Expected<HeaderBytes, CodecFailure> swap_label(std::span<const std::uint8_t> bits,
                                               std::uint32_t new_circuit_id) {
    auto decoded = decode_header(bits);
    if (!decoded)
        return decoded.error();
    if (new_circuit_id > kMaxCircuitId)
        return CodecFailure{CodecError::FieldOverflow, "circuit_id"};
    HeaderFields f = decoded.value();
    f.circuit_id = new_circuit_id;
    return encode_header(f);
}

TailBytes encode_tail(const HeaderBytes& header_bits) {
    TailBytes out{};
    BitWriter w(out);
    w.put(kEndMarker, 16);
    w.put(crc16_ccitt(header_bits), 16);
    return out;
}

Expected<std::monostate, CodecFailure> decode_tail(std::span<const std::uint8_t> tail_bits,
                                                   std::span<const std::uint8_t> header_bits) {
    if (tail_bits.size() != kTailOctets || header_bits.size() != kHeaderOctets)
        return CodecFailure{CodecError::BadLength, {}};
    BitReader r(tail_bits);
    if (r.get(16) != kEndMarker)
        return CodecFailure{CodecError::BadEndMarker, {}};
    if (r.get(16) != crc16_ccitt(header_bits))
        return CodecFailure{CodecError::HeaderMismatch, {}};
    return std::monostate{};
}

} // namespace qw::codec
