#ifndef QWIRE_CODEC_HPP
#define QWIRE_CODEC_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "qwire/expected.hpp"

// Bit-exact encoder/decoder for the Quantum Wrapper header and tail.
//
// Header layout, MSB-first across 11 octets (88 bits):
//   [ 0..15] preamble            0xA5C3
//   [16..17] class               A=0 B=1 C=2 D=3
//   [18..37] circuit_id          20-bit label
//   [38..40] priority
//   [41..60] payload_duration_us
//   [61..63] entanglement_type   none=0 polarization=1 time_bin=2 frequency_bin=3
//   [64..67] qos
//   [68..69] tos                 real_time=0 non_real_time=1
//   [70..71] pad (zero)
//   [72..87] CRC-16-CCITT over bits 0..69
//
// Tail layout (4 octets): 16-bit end marker 0x3CA5, then CRC-16-CCITT over
// the 11 header octets. A full bit diagram lives in docs/wire-format.md.

namespace qw::codec {

inline constexpr std::uint16_t kPreamble = 0xA5C3;
inline constexpr std::uint16_t kEndMarker = 0x3CA5;
inline constexpr std::size_t kHeaderOctets = 11;
inline constexpr std::size_t kTailOctets = 4;
inline constexpr std::size_t kHeaderBits = 88;
inline constexpr std::size_t kChecksummedBits = 70; // header bits covered by the CRC
inline constexpr std::uint32_t kMaxCircuitId = (1u << 20) - 1;
inline constexpr std::uint32_t kMaxDurationUs = (1u << 20) - 1;

enum class QwClass : std::uint8_t { A = 0, B = 1, C = 2, D = 3 };
enum class EntanglementType : std::uint8_t {
    none = 0,
    polarization = 1,
    time_bin = 2,
    frequency_bin = 3,
};
enum class ServiceType : std::uint8_t { real_time = 0, non_real_time = 1 };

struct HeaderFields {
    QwClass cls = QwClass::A;
    std::uint32_t circuit_id = 0;          // 20 bits
    std::uint8_t priority = 0;             // 3 bits
    std::uint32_t payload_duration_us = 0; // 20 bits
    EntanglementType entanglement = EntanglementType::none;
    std::uint8_t qos = 0;                  // 4 bits
    ServiceType tos = ServiceType::non_real_time;

    // Classes C and D decode fine but are reserved; switches drop them.
    bool reserved_class() const { return cls == QwClass::C || cls == QwClass::D; }

    bool operator==(const HeaderFields&) const = default;
};

enum class CodecError {
    BadLength,
    BadPreamble,
    ChecksumMismatch,
    FieldOverflow,
    BadEndMarker,
    HeaderMismatch,
};

struct CodecFailure {
    CodecError code;
    std::string_view field; // set for FieldOverflow
};

const char* to_string(CodecError e);

using HeaderBytes = std::array<std::uint8_t, kHeaderOctets>;
using TailBytes = std::array<std::uint8_t, kTailOctets>;

// CRC-16-CCITT (poly 0x1021, init 0xFFFF, no reflection, no final xor).
std::uint16_t crc16_ccitt(std::span<const std::uint8_t> bytes);
// Same CRC over the leading nbits of the buffer, MSB-first.
std::uint16_t crc16_ccitt_bits(std::span<const std::uint8_t> bytes, std::size_t nbits);

Expected<HeaderBytes, CodecFailure> encode_header(const HeaderFields& fields);
Expected<HeaderFields, CodecFailure> decode_header(std::span<const std::uint8_t> bits);

// Rewrites the circuit-id label and recomputes the checksum; every other
// field bit is untouched.
Expected<HeaderBytes, CodecFailure> swap_label(std::span<const std::uint8_t> bits,
                                               std::uint32_t new_circuit_id);

TailBytes encode_tail(const HeaderBytes& header_bits);
// Verifies the end marker and that the tail's checksum matches this header.
Expected<std::monostate, CodecFailure> decode_tail(std::span<const std::uint8_t> tail_bits,
                                                   std::span<const std::uint8_t> header_bits);

} // namespace qw::codec

#endif
