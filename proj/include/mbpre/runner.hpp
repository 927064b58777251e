#pragma once

#include "mbpre/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mbpre::runner {

struct OutputFile {
  std::string name;
  std::string sha256;
};

struct RunManifest {
  std::filesystem::path directory;
  std::vector<OutputFile> outputs;
  nlohmann::json json;  // written as manifest.json
};

// Dispatches the configured command, writes its CSV files, summary.json and
// manifest.json into config.output. CSV bytes depend only on the config and
// the artifact version, not on the number of threads.
RunManifest run(const ExperimentConfig& config);

// "%.17g"
std::string format_double(double v);

std::string sha256_hex(const std::filesystem::path& file);

}  // namespace mbpre::runner
