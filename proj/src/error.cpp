#include "trip/error.hpp"

namespace trip {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::OutOfBoundsEvent: return "OutOfBoundsEvent";
    case ErrorKind::EmptyStream: return "EmptyStream";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::DegenerateRegion: return "DegenerateRegion";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::LayerCountMismatch: return "LayerCountMismatch";
    case ErrorKind::DisconnectedLoss: return "DisconnectedLoss";
    case ErrorKind::ScheduleIncomplete: return "ScheduleIncomplete";
    case ErrorKind::MappingInvalid: return "MappingInvalid";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(detail) {}

}  // namespace trip
