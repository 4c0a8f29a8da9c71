#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "finkam/json_io.hpp"

namespace finkam::cli {

inline const std::vector<std::string> kSubcommands{"schedule", "smooth-demo", "dio", "kam", "duffing"};

/// Environment variable that overrides the output directory of the config document.
inline constexpr const char* kOutEnv = "FINKAM_OUT";

struct ValidationError {
  std::string path;  // e.g. "$.h0.terms[1].exponent"
  std::string message;
};

/// Values given on the command line; they take precedence over the document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> slack;
  std::optional<std::string> out;
};

/// A fully validated run. `payload` holds the subcommand keys with every default filled in.
struct RunConfig {
  std::string subcommand;
  Json payload;
  std::uint64_t seed = 1;
  double slack = 10.0;
  Json tolerances = Json::object();
  std::string out = ".";
  std::string hash;  // FNV-1a of the canonical config (output directory excluded)

  Json canonical() const;
};

struct Validation {
  std::optional<RunConfig> config;
  std::vector<ValidationError> errors;

  bool ok() const noexcept { return errors.empty(); }
  /// One "path: message" line per error.
  std::string report() const;
};

/// Checks the whole document and reports every problem, not just the first.
/// Output directory precedence: overrides.out, then `env_out`, then the document's "out", then ".".
Validation parse_and_validate(const std::string& subcommand, const Json& document, const Overrides& overrides = {},
                              const std::optional<std::string>& env_out = std::nullopt);
/// Same, starting from the document text; syntax errors are reported at path "$".
Validation parse_and_validate_text(const std::string& subcommand, const std::string& text,
                                   const Overrides& overrides = {},
                                   const std::optional<std::string>& env_out = std::nullopt);

struct Artifact {
  std::string name;
  std::string content;
};

/// summary.json plus CSV data files, all carrying the config hash.
struct RunOutput {
  Json summary;
  std::string summary_text;
  std::vector<Artifact> files;
};

/// Runs the experiment. Library errors propagate with their family intact.
RunOutput run_experiment(const RunConfig& config);

/// Writes summary.json and the data files into `dir`, creating it if needed. Throws IoError.
void write_outputs(const RunOutput& output, const std::string& dir);

}  // namespace finkam::cli
