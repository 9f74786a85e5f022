#include "fedcvlc/packet_codec.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <string>

#include "fedcvlc/error.hpp"

namespace fedcvlc {
namespace {

class BitWriter {
 public:
  explicit BitWriter(PacketBytes* out) : out_(out) {}

  // Appends the low `width` bits of value, most significant first.
  void put(std::uint64_t value, int width) {
    for (int i = width - 1; i >= 0; --i) {
      if (used_ == 0) out_->push_back(0);
      if ((value >> i) & 1u) out_->back() |= static_cast<std::uint8_t>(0x80u >> used_);
      used_ = (used_ + 1) & 7;
    }
  }

 private:
  PacketBytes* out_;
  int used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t get(int width) {
    std::uint64_t value = 0;
    for (int i = 0; i < width; ++i, ++pos_) {
      const std::uint8_t byte = bytes_[pos_ >> 3];
      value = (value << 1) | ((byte >> (7 - (pos_ & 7))) & 1u);
    }
    return value;
  }

  std::size_t position() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_be32(PacketBytes* out, std::uint32_t v) {
  out->push_back(static_cast<std::uint8_t>(v >> 24));
  out->push_back(static_cast<std::uint8_t>(v >> 16));
  out->push_back(static_cast<std::uint8_t>(v >> 8));
  out->push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

bool fits(std::uint64_t value, int width) { return width >= 64 || (value >> width) == 0; }

void check_width(int width, const char* what) {
  if (width < 1 || width > 32) {
    throw Error(ErrorCode::kFieldOverflow, std::string(what) + " width must be in [1, 32]");
  }
}

}  // namespace

std::size_t packet_size_bytes(std::size_t count, int position_bits, int code_bits) {
  const std::size_t payload_bits = count * static_cast<std::size_t>(position_bits + code_bits);
  return kPacketHeaderBytes + (payload_bits + 7) / 8;
}

PacketBytes encode_packet(std::span<const PacketEntry> entries, int code_bits, int position_bits,
                          QuantizerKind kind, const CentroidMeta& meta, std::int64_t max_bits) {
  if (entries.empty()) throw Error(ErrorCode::kInvalidInput, "packet needs at least one entry");
  check_width(position_bits, "position ID");
  check_width(code_bits, "centroid ID");
  const std::size_t size = packet_size_bytes(entries.size(), position_bits, code_bits);
  if (static_cast<std::int64_t>(size * 8) > max_bits) {
    throw Error(ErrorCode::kPacketOverflow, std::to_string(size * 8) + " bits exceed budget of " +
                                                std::to_string(max_bits));
  }
  for (const PacketEntry& e : entries) {
    if (!fits(e.pid, position_bits)) {
      throw Error(ErrorCode::kFieldOverflow, "pid " + std::to_string(e.pid) + " needs more than " +
                                                 std::to_string(position_bits) + " bits");
    }
    if (!fits(e.cid, code_bits)) {
      throw Error(ErrorCode::kFieldOverflow, "cid " + std::to_string(e.cid) + " needs more than " +
                                                 std::to_string(code_bits) + " bits");
    }
  }

  PacketBytes out;
  out.reserve(size);
  out.push_back(kPacketVersion);
  out.push_back(static_cast<std::uint8_t>(kind));
  out.push_back(static_cast<std::uint8_t>(position_bits));
  out.push_back(static_cast<std::uint8_t>(code_bits));
  put_be32(&out, static_cast<std::uint32_t>(entries.size()));
  if (kind == QuantizerKind::kPq) {
    put_be32(&out, std::bit_cast<std::uint32_t>(meta.lo));
    put_be32(&out, std::bit_cast<std::uint32_t>(meta.hi));
  } else {
    put_be32(&out, std::bit_cast<std::uint32_t>(meta.l2_norm));
    put_be32(&out, 0);
  }

  BitWriter writer(&out);
  for (const PacketEntry& e : entries) {
    writer.put(e.pid, position_bits);
    writer.put(e.cid, code_bits);
  }
  return out;
}

std::size_t peek_packet_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPacketHeaderBytes) throw Error(ErrorCode::kCorruptPacket, "truncated header");
  if (bytes[0] != kPacketVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "packet version " + std::to_string(bytes[0]));
  }
  const int s = bytes[2];
  const int y = bytes[3];
  if (s < 1 || s > 32 || y < 1 || y > 32) {
    throw Error(ErrorCode::kCorruptPacket, "field widths out of range");
  }
  const std::uint32_t count = get_be32(bytes, 4);
  if (count == 0) throw Error(ErrorCode::kCorruptPacket, "packet has no entries");
  return packet_size_bytes(count, s, y);
}

DecodedPacket decode_packet(std::span<const std::uint8_t> bytes) {
  const std::size_t size = peek_packet_size(bytes);
  if (bytes.size() != size) {
    throw Error(ErrorCode::kCorruptPacket, "length " + std::to_string(bytes.size()) +
                                               " does not match header (" + std::to_string(size) + ")");
  }
  if (bytes[1] > static_cast<std::uint8_t>(QuantizerKind::kQsgd)) {
    throw Error(ErrorCode::kCorruptPacket, "unknown quantizer kind");
  }

  DecodedPacket packet;
  packet.kind = static_cast<QuantizerKind>(bytes[1]);
  packet.position_bits = bytes[2];
  packet.code_bits = bytes[3];
  const std::uint32_t count = get_be32(bytes, 4);
  if (packet.kind == QuantizerKind::kPq) {
    packet.meta.lo = std::bit_cast<float>(get_be32(bytes, 8));
    packet.meta.hi = std::bit_cast<float>(get_be32(bytes, 12));
  } else {
    packet.meta.l2_norm = std::bit_cast<float>(get_be32(bytes, 8));
    if (get_be32(bytes, 12) != 0) throw Error(ErrorCode::kCorruptPacket, "nonzero metadata padding");
  }

  BitReader reader(bytes.subspan(kPacketHeaderBytes));
  packet.entries.resize(count);
  for (PacketEntry& e : packet.entries) {
    e.pid = static_cast<std::uint32_t>(reader.get(packet.position_bits));
    e.cid = static_cast<std::uint32_t>(reader.get(packet.code_bits));
  }
  const std::size_t payload_bits = (size - kPacketHeaderBytes) * 8;
  if (reader.get(static_cast<int>(payload_bits - reader.position())) != 0) {
    throw Error(ErrorCode::kCorruptPacket, "nonzero padding bits");
  }
  return packet;
}

void write_packet_file(const std::filesystem::path& path, std::span<const PacketBytes> packets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write packets: " + path.string());
  const auto n = static_cast<std::uint32_t>(packets.size());
  const unsigned char prefix[4] = {static_cast<unsigned char>(n), static_cast<unsigned char>(n >> 8),
                                   static_cast<unsigned char>(n >> 16),
                                   static_cast<unsigned char>(n >> 24)};
  out.write(reinterpret_cast<const char*>(prefix), 4);
  for (const PacketBytes& p : packets) {
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
  }
  if (!out) throw Error(ErrorCode::kIo, "cannot write packets: " + path.string());
}

std::vector<PacketBytes> read_packet_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read packets: " + path.string());
  const std::vector<std::uint8_t> data{std::istreambuf_iterator<char>(in),
                                       std::istreambuf_iterator<char>()};
  if (data.size() < 4) throw Error(ErrorCode::kCorruptPacket, "packet file too short");
  const std::uint32_t n = std::uint32_t{data[0]} | (std::uint32_t{data[1]} << 8) |
                          (std::uint32_t{data[2]} << 16) | (std::uint32_t{data[3]} << 24);
  std::vector<PacketBytes> packets;
  std::size_t at = 4;
  const std::span<const std::uint8_t> all(data);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t size = peek_packet_size(all.subspan(at));
    if (at + size > data.size()) throw Error(ErrorCode::kCorruptPacket, "truncated packet payload");
    packets.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(at),
                         data.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  if (at != data.size()) throw Error(ErrorCode::kCorruptPacket, "trailing bytes after last packet");
  return packets;
}

}  // namespace fedcvlc
