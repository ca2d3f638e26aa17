#pragma once

#include "dualline/metrics.hpp"
#include "dualline/pipeline.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dualline {

inline constexpr const char* kSoftwareVersion = "dualline 0.1.0";

// JSON manifests with stable key ordering; re-running the same command on
// the same config reproduces them byte for byte.
std::string run_manifest_json(const PipelineConfig& cfg, const RunResult& result,
                              double id_score, double sem_score,
                              const std::map<std::string, double>& output_vmax);

std::string sweep_manifest_json(const std::string& command, const PipelineConfig& base,
                                const std::vector<std::string>& cells,
                                std::uint64_t seed_count,
                                const std::vector<std::string>& files);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dualline
