#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "causalaug/error.hpp"

namespace causalaug {

inline constexpr const char* kVersion = "0.1.0";

// Reproducibility record written beside each subcommand's output. Contents
// are limited to run-determining facts (no timestamps, no hostnames) so the
// manifest itself is byte-stable across reruns.
inline void write_manifest(const std::string& output_path, nlohmann::json manifest) {
  manifest["version"] = kVersion;
  std::string path = output_path + ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open manifest file: " + path);
  out << manifest.dump(2) << "\n";
  if (!out) throw Error("write failed: " + path);
}

}  // namespace causalaug
