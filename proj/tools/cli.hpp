#pragma once

#include <string>
#include <vector>

#include "trip/synth.hpp"

namespace trip::cli {

/// One line of a dataset manifest.
struct ManifestRow {
  std::string filename;
  int label = 0;
  synth::BoundingBox bbox;
};

inline constexpr const char* kManifestHeader = "filename,label,bbox_x0,bbox_y0,bbox_x1,bbox_y1";

std::string write_manifest(const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> parse_manifest(const std::string& text);

/// Runs one command line; returns the process exit code (0 ok, 2 config error,
/// 3 data error). Errors are reported on stderr as `ERROR <kind>: <detail>`.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace trip::cli
