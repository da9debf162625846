#pragma once

#include <stdexcept>
#include <string>

namespace trip {

enum class ErrorKind {
  BadMagic,
  TruncatedFile,
  OutOfBoundsEvent,
  EmptyStream,
  ConfigInvalid,
  DegenerateRegion,
  ShapeMismatch,
  ValueOutOfRange,
  LayerCountMismatch,
  DisconnectedLoss,
  ScheduleIncomplete,
  MappingInvalid,
  IoError,
};

const char* to_string(ErrorKind kind);

/// Exception carrying one of the library's error kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace trip
