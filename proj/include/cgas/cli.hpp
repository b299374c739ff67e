#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cgas {

// Parses a run specification. TOML is used for *.toml paths; otherwise the
// text is read as JSON. Syntax errors raise SpecError with the line number.
nlohmann::json parse_spec_text(const std::string& text, const std::string& path);
nlohmann::json read_spec_file(const std::string& path);

struct RunOptions {
  std::optional<std::uint64_t> seed; // overrides the spec
  std::optional<int> threads;        // overrides the spec and CGAS_THREADS
  std::string out;                   // overrides the spec's "output"
  std::string spec_path;             // for the manifest
};

struct RunResult {
  std::string output_dir;
  std::vector<std::string> files; // written data files, relative to output_dir
  nlohmann::json summary;
  nlohmann::json manifest;
};

// Pipelines: equilibrium, ground-state, gibbs, free-energy, jellium,
// diagnostics, tile. The whole spec is validated before any compute; unknown
// keys and missing fields raise SpecError naming the field. Writes the data
// files, summary.json and manifest.json into the output directory.
RunResult run_spec(const nlohmann::json& spec, const RunOptions& opt);

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Entry point of the command-line tool. Exit codes: 0 success, 1 usage error
// or failed verification, 2 invalid spec, 3 numerical failure.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace cgas
