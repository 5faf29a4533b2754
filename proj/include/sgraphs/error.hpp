#pragma once

#include <stdexcept>
#include <string>

namespace sgraphs {

enum class ErrorCode {
  UnknownVariable,
  KindMismatch,
  NotOpposed,
  SingularSystem,
  InsufficientWalls,
  UnknownKeyframe,
  EmptyInput,
  PoseInWall,
  WaypointInWall,
  InsufficientOverlap,
  NoOverlap,
  EmptyCloud,
  IoError,
  BadDataset,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sgraphs
