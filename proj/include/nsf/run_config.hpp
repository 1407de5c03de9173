#pragma once

#include <string>

#include "nsf/fusion.hpp"

namespace nsf {

// Full run description: the fusion tunables plus the artifact paths a
// driver needs. The JSON config file populates the tunables; paths and
// mode flags come from the command line.
struct RunConfig {
  FusionConfig fusion;
  int jobs = 1;  // concurrent batch pairs

  std::string ir_path;
  std::string vis_path;
  std::string out_path;
  std::string batch_dir;
  std::string out_dir;
  std::string metrics_path;
  std::string diagnostics_dir;
};

RunConfig default_run_config();

// Parses a JSON config file and overlays it onto the defaults. Any
// problem — unreadable file, malformed JSON, unknown key, wrong type,
// out-of-range value — raises bad_config with a message naming the key.
RunConfig load_config(const std::string& path);

}  // namespace nsf
