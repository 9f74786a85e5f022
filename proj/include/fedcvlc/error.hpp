#pragma once

#include <stdexcept>
#include <string>

namespace fedcvlc {

enum class ErrorCode {
  kInvalidInput,
  kDegenerateDistribution,
  kInvalidBits,
  kInfeasible,
  kPacketOverflow,
  kFieldOverflow,
  kUnsupportedVersion,
  kCorruptPacket,
  kIo,
};

const char* to_string(ErrorCode code);

// Every library failure surfaces as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fedcvlc
