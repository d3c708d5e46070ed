#include "hjpatch/report.hpp"

#include <cstdio>
#include <fstream>

#include "hjpatch/errors.hpp"

namespace hjpatch {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(text.data(), text.size());
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("hash_file: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

std::uint64_t hash_field(const ScalarField& f) {
  const Grid& g = f.grid();
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  const std::uint64_t dims = g.dims();
  mix(&dims, sizeof(dims));
  for (std::size_t i = 0; i < g.dims(); ++i) {
    const double lo = g.lo()[i];
    const double hi = g.hi()[i];
    const std::uint64_t n = g.shape()[i];
    mix(&lo, sizeof(lo));
    mix(&hi, sizeof(hi));
    mix(&n, sizeof(n));
  }
  mix(f.values().data(), f.values().size() * sizeof(double));
  return h;
}

nlohmann::json make_report(const std::string& command,
                           const Provenance& prov) {
  nlohmann::json j;
  j["artifact"] = kArtifactVersion;
  j["command"] = command;
  nlohmann::json p;
  p["config_hash"] = prov.config_hash;
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [name, hash] : prov.inputs) inputs[name] = hash;
  p["inputs"] = inputs;
  j["provenance"] = p;
  return j;
}

nlohmann::json stats_to_json(const SolveStats& stats) {
  nlohmann::json j;
  j["sweeps"] = stats.sweeps;
  j["hamiltonian_evals"] = stats.hamiltonian_evals;
  j["converged"] = stats.converged;
  j["residual_history"] = stats.max_residual_history;
  return j;
}

void write_report(const nlohmann::json& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOFailure("write_report: cannot open '" + path + "'");
  out << report.dump(2) << '\n';
  if (!out) throw IOFailure("write_report: write to '" + path + "' failed");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOFailure("write_csv: cannot open '" + path + "'");
  out << header << '\n';
  for (const auto& row : rows) out << row << '\n';
  if (!out) throw IOFailure("write_csv: write to '" + path + "' failed");
}

}  // namespace hjpatch
