#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjpatch/grid.hpp"
#include "hjpatch/solver_global.hpp"

namespace hjpatch {

inline constexpr const char* kArtifactVersion = "hjpatch 0.1.0";

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t h);
// Hash of a file's raw bytes.
std::uint64_t hash_file(const std::string& path);
// Hash of grid geometry plus the payload bit patterns.
std::uint64_t hash_field(const ScalarField& f);

struct Provenance {
  // Hex FNV-1a of the raw config text.
  std::string config_hash;
  // Logical name -> hex hash of each input file or field.
  std::map<std::string, std::string> inputs;
};

// Report skeleton with version and provenance; callers attach payload keys.
// Reports deliberately omit wall time so fixed-seed reruns are bit-identical;
// timing goes to the console instead.
nlohmann::json make_report(const std::string& command, const Provenance& prov);

nlohmann::json stats_to_json(const SolveStats& stats);

void write_report(const nlohmann::json& report, const std::string& path);

// One CSV row per entry; doubles rendered with "%.17g" so values round-trip.
std::string format_double(double v);
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows);

}  // namespace hjpatch
