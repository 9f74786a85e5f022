#pragma once

// Wire format of one packet (all multi-byte header fields big-endian):
//
//   byte  0      version (1)
//   byte  1      quantizer kind (0 = PQ, 1 = QSGD)
//   byte  2      s, bits per position ID, 1..32
//   byte  3      y, bits per centroid ID, 1..32
//   bytes 4..7   count, number of entries, >= 1
//   bytes 8..15  centroid metadata: PQ lo, hi as binary32;
//                QSGD l2 norm as binary32 followed by 32 zero bits
//   bytes 16..   count * (s + y) payload bits, MSB first, each entry's
//                position ID followed by its centroid ID, zero-padded to a
//                byte boundary
//
// The header is exactly 128 bits regardless of s and y.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedcvlc/quantizer.hpp"

namespace fedcvlc {

inline constexpr std::uint8_t kPacketVersion = 1;
inline constexpr std::size_t kPacketHeaderBytes = 16;
inline constexpr std::int64_t kMtuPacketBits = 12000;

struct PacketEntry {
  std::uint32_t pid = 0;
  std::uint32_t cid = 0;

  bool operator==(const PacketEntry&) const = default;
};

struct DecodedPacket {
  std::vector<PacketEntry> entries;
  int code_bits = 0;
  int position_bits = 0;
  QuantizerKind kind = QuantizerKind::kPq;
  CentroidMeta meta;

  bool operator==(const DecodedPacket&) const = default;
};

using PacketBytes = std::vector<std::uint8_t>;

// Size on the wire of a packet with `count` entries.
std::size_t packet_size_bytes(std::size_t count, int position_bits, int code_bits);

// Throws PacketOverflow when the encoded size exceeds max_bits and
// FieldOverflow when a pid or cid does not fit its width.
PacketBytes encode_packet(std::span<const PacketEntry> entries, int code_bits, int position_bits,
                          QuantizerKind kind, const CentroidMeta& meta,
                          std::int64_t max_bits = kMtuPacketBits);

// Exact inverse of encode_packet. Throws UnsupportedVersion or CorruptPacket.
DecodedPacket decode_packet(std::span<const std::uint8_t> bytes);

// Length of the packet starting at `bytes`, read from its header.
std::size_t peek_packet_size(std::span<const std::uint8_t> bytes);

// .pkts files: u32 little-endian packet count, then the packets back to back.
void write_packet_file(const std::filesystem::path& path, std::span<const PacketBytes> packets);
std::vector<PacketBytes> read_packet_file(const std::filesystem::path& path);

}  // namespace fedcvlc
