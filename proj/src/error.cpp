#include "fedcvlc/error.hpp"

namespace fedcvlc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kDegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::kInvalidBits: return "InvalidBits";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kPacketOverflow: return "PacketOverflow";
    case ErrorCode::kFieldOverflow: return "FieldOverflow";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kCorruptPacket: return "CorruptPacket";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace fedcvlc
