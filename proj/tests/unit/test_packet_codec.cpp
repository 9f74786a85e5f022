#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "fedcvlc/error.hpp"
#include "fedcvlc/packet_codec.hpp"

namespace fedcvlc {
namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

CentroidMeta pq_meta(float lo, float hi) {
  CentroidMeta m;
  m.lo = lo;
  m.hi = hi;
  return m;
}

CentroidMeta qsgd_meta(float norm) {
  CentroidMeta m;
  m.l2_norm = norm;
  return m;
}

std::uint32_t random_field(std::mt19937_64& rng, int width) {
  const std::uint64_t top = width == 32 ? 0xFFFFFFFFull : (1ull << width) - 1;
  return static_cast<std::uint32_t>(std::uniform_int_distribution<std::uint64_t>(0, top)(rng));
}

TEST(PacketCodec, HandPackedSingleEntry) {
  const std::vector<PacketEntry> entries{{5, 3}};
  const PacketBytes bytes = encode_packet(entries, 2, 4, QuantizerKind::kPq, pq_meta(-1.0f, 2.0f));
  ASSERT_EQ(bytes.size(), 17u);
  const PacketBytes header{0x01, 0x00, 0x04, 0x02, 0x00, 0x00, 0x00, 0x01,
                           0xBF, 0x80, 0x00, 0x00, 0x40, 0x00, 0x00, 0x00};
  EXPECT_EQ(PacketBytes(bytes.begin(), bytes.begin() + 16), header);
  EXPECT_EQ(bytes[16], 0x5C);
}

TEST(PacketCodec, QsgdHeaderPadsMetadata) {
  const std::vector<PacketEntry> entries{{1, 1}, {2, 0}};
  const PacketBytes bytes = encode_packet(entries, 1, 2, QuantizerKind::kQsgd, qsgd_meta(5.0f));
  // 2 * (2 + 1) = 6 payload bits: 01 1 10 0 + 00 padding.
  ASSERT_EQ(bytes.size(), 17u);
  EXPECT_EQ(bytes[1], 1);
  EXPECT_EQ(bytes[8], 0x40);
  EXPECT_EQ(bytes[9], 0xA0);
  for (int i = 12; i < 16; ++i) EXPECT_EQ(bytes[i], 0);
  EXPECT_EQ(bytes[16], 0x70);
  const DecodedPacket p = decode_packet(bytes);
  EXPECT_EQ(p.meta.l2_norm, 5.0f);
  EXPECT_EQ(p.entries, entries);
}

TEST(PacketCodec, RoundtripAllWidths) {
  std::mt19937_64 rng(2024);
  int trials = 0;
  for (int s = 1; s <= 32; ++s) {
    for (int y = 1; y <= 32; ++y) {
      for (int rep = 0; rep < 10; ++rep, ++trials) {
        const auto max_count = static_cast<std::size_t>((kMtuPacketBits - 128) / (s + y));
        const std::size_t count =
            std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(max_count, 64))(rng);
        std::vector<PacketEntry> entries(count);
        for (PacketEntry& e : entries) e = {random_field(rng, s), random_field(rng, y)};
        const QuantizerKind kind = rep % 2 == 0 ? QuantizerKind::kPq : QuantizerKind::kQsgd;
        const CentroidMeta meta = kind == QuantizerKind::kPq
                                      ? pq_meta(std::bit_cast<float>(static_cast<std::uint32_t>(rng())),
                                                std::bit_cast<float>(static_cast<std::uint32_t>(rng())))
                                      : qsgd_meta(std::bit_cast<float>(static_cast<std::uint32_t>(rng())));
        const PacketBytes bytes = encode_packet(entries, y, s, kind, meta);
        ASSERT_EQ(bytes.size(), 16 + (count * static_cast<std::size_t>(s + y) + 7) / 8);
        ASSERT_EQ(bytes.size(), packet_size_bytes(count, s, y));
        const DecodedPacket p = decode_packet(bytes);
        ASSERT_EQ(p.entries, entries) << "s=" << s << " y=" << y;
        ASSERT_EQ(p.code_bits, y);
        ASSERT_EQ(p.position_bits, s);
        ASSERT_EQ(p.kind, kind);
        if (kind == QuantizerKind::kPq) {
          ASSERT_EQ(std::bit_cast<std::uint32_t>(p.meta.lo), std::bit_cast<std::uint32_t>(meta.lo));
          ASSERT_EQ(std::bit_cast<std::uint32_t>(p.meta.hi), std::bit_cast<std::uint32_t>(meta.hi));
        } else {
          ASSERT_EQ(std::bit_cast<std::uint32_t>(p.meta.l2_norm),
                    std::bit_cast<std::uint32_t>(meta.l2_norm));
        }
      }
    }
  }
  EXPECT_EQ(trials, 10240);
}

TEST(PacketCodec, EncodingIsDeterministic) {
  std::vector<PacketEntry> entries;
  for (std::uint32_t i = 0; i < 100; ++i) entries.push_back({i * 7, i % 16});
  EXPECT_EQ(encode_packet(entries, 4, 11, QuantizerKind::kPq, pq_meta(0, 1)),
            encode_packet(entries, 4, 11, QuantizerKind::kPq, pq_meta(0, 1)));
}

TEST(PacketCodec, FullMtuPacket) {
  // s = 19, y = 1: 593 entries use 11860 of the 11872 payload bits.
  std::vector<PacketEntry> entries(593);
  for (std::uint32_t i = 0; i < entries.size(); ++i) entries[i] = {299999 - i, i & 1};
  const PacketBytes bytes = encode_packet(entries, 1, 19, QuantizerKind::kQsgd, qsgd_meta(1));
  EXPECT_EQ(bytes.size(), 1499u);
  EXPECT_EQ(decode_packet(bytes).entries, entries);
  entries.push_back({0, 0});
  EXPECT_EQ(code_of([&] { encode_packet(entries, 1, 19, QuantizerKind::kQsgd, qsgd_meta(1)); }),
            ErrorCode::kPacketOverflow);
}

TEST(PacketCodec, EncodeErrors) {
  const std::vector<PacketEntry> one{{5, 3}};
  EXPECT_EQ(code_of([&] { encode_packet(one, 2, 2, QuantizerKind::kPq, {}); }), ErrorCode::kFieldOverflow);
  EXPECT_EQ(code_of([&] { encode_packet(one, 1, 4, QuantizerKind::kPq, {}); }), ErrorCode::kFieldOverflow);
  EXPECT_EQ(code_of([&] { encode_packet(one, 33, 4, QuantizerKind::kPq, {}); }), ErrorCode::kFieldOverflow);
  EXPECT_EQ(code_of([&] { encode_packet(one, 2, 0, QuantizerKind::kPq, {}); }), ErrorCode::kFieldOverflow);
  EXPECT_EQ(code_of([&] { encode_packet({}, 2, 4, QuantizerKind::kPq, {}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { encode_packet(one, 2, 4, QuantizerKind::kPq, {}, 135); }),
            ErrorCode::kPacketOverflow);
  EXPECT_NO_THROW(encode_packet(one, 2, 4, QuantizerKind::kPq, {}, 136));
}

class DecodeErrors : public ::testing::Test {
 protected:
  PacketBytes good_ = encode_packet(std::vector<PacketEntry>{{5, 3}, {9, 1}}, 2, 4, QuantizerKind::kPq,
                                    pq_meta(0, 1));
};

TEST_F(DecodeErrors, Version) {
  PacketBytes b = good_;
  b[0] = 2;
  EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kUnsupportedVersion);
}

TEST_F(DecodeErrors, CountField) {
  for (std::uint8_t v : {0x00, 0x03, 0xFF}) {
    PacketBytes b = good_;
    b[7] = v;
    EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kCorruptPacket) << int(v);
  }
  PacketBytes b = good_;
  b[4] = 0x80;
  EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kCorruptPacket);
}

TEST_F(DecodeErrors, Truncation) {
  for (std::size_t n = 0; n < good_.size(); ++n) {
    const std::span<const std::uint8_t> cut(good_.data(), n);
    EXPECT_EQ(code_of([&] { decode_packet(cut); }), ErrorCode::kCorruptPacket) << n;
  }
  PacketBytes longer = good_;
  longer.push_back(0);
  EXPECT_EQ(code_of([&] { decode_packet(longer); }), ErrorCode::kCorruptPacket);
}

TEST_F(DecodeErrors, WidthsKindAndPadding) {
  PacketBytes b = good_;
  b[2] = 0;
  EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kCorruptPacket);
  b = good_;
  b[3] = 40;
  EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kCorruptPacket);
  b = good_;
  b[1] = 7;
  EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kCorruptPacket);
  b = good_;
  b.back() |= 0x01;  // 12 payload bits, the last 4 are padding
  EXPECT_EQ(code_of([&] { decode_packet(b); }), ErrorCode::kCorruptPacket);
  PacketBytes q = encode_packet(std::vector<PacketEntry>{{1, 1}}, 1, 1, QuantizerKind::kQsgd, qsgd_meta(2));
  q[15] = 1;
  EXPECT_EQ(code_of([&] { decode_packet(q); }), ErrorCode::kCorruptPacket);
}

class PacketFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            ("fedcvlc_pkts_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  void TearDown() override { std::filesystem::remove(path_); }

  std::filesystem::path path_;
};

TEST_F(PacketFile, Roundtrip) {
  std::vector<PacketBytes> packets;
  for (std::uint32_t r = 0; r < 5; ++r) {
    std::vector<PacketEntry> entries;
    for (std::uint32_t i = 0; i <= r; ++i) entries.push_back({r * 10 + i, i});
    packets.push_back(encode_packet(entries, 3 + static_cast<int>(r), 7, QuantizerKind::kPq, pq_meta(-1, 1)));
  }
  write_packet_file(path_, packets);
  EXPECT_EQ(read_packet_file(path_), packets);
  std::size_t total = 4;
  for (const PacketBytes& p : packets) total += p.size();
  EXPECT_EQ(std::filesystem::file_size(path_), total);

  std::ifstream in(path_, std::ios::binary);
  unsigned char prefix[4];
  in.read(reinterpret_cast<char*>(prefix), 4);
  EXPECT_EQ(prefix[0], 5);
  EXPECT_EQ(prefix[1] | prefix[2] | prefix[3], 0);
}

TEST_F(PacketFile, EmptyList) {
  write_packet_file(path_, {});
  EXPECT_TRUE(read_packet_file(path_).empty());
}

TEST_F(PacketFile, Errors) {
  EXPECT_EQ(code_of([&] { read_packet_file(path_ / "missing"); }), ErrorCode::kIo);
  const std::vector<PacketBytes> packets{
      encode_packet(std::vector<PacketEntry>{{1, 1}}, 2, 4, QuantizerKind::kPq, pq_meta(0, 1))};
  write_packet_file(path_, packets);
  std::filesystem::resize_file(path_, std::filesystem::file_size(path_) - 1);
  EXPECT_EQ(code_of([&] { read_packet_file(path_); }), ErrorCode::kCorruptPacket);
  write_packet_file(path_, packets);
  {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.put(0);
  }
  EXPECT_EQ(code_of([&] { read_packet_file(path_); }), ErrorCode::kCorruptPacket);
}

}  // namespace
}  // namespace fedcvlc
