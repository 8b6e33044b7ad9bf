#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pho/synth.hpp"
#include "pho/trainer.hpp"

namespace pho {

enum class LogLevel { kError, kInfo, kDebug };

LogLevel parse_log_level(const std::string& s);
// Reads PHO_LOG; unset means error-only output.
LogLevel log_level_from_env();

// Everything a run needs. Loaded from a JSON document whose keys mirror the
// fields below; unknown keys are rejected at every level.
struct RunConfig {
  SynthSpec synth;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::string out = "pho-out";
  // Lambda as given by the file or a flag. When absent the mode decides:
  // 1 for sas and aal, 0 otherwise.
  std::optional<double> lambda;

  void validate() const;
};

// Command-line overrides applied on top of the file (or defaults).
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> alpha, beta, gamma, rho, lambda;
  std::optional<std::string> mode;
  std::optional<int> k;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Applies overrides, resolves lambda, syncs derived fields and validates.
// An explicit non-zero lambda in baseline or learned-a mode is an error.
RunConfig finalize(RunConfig cfg, const Overrides& ov);

// Same config in another mode, for ablations: an explicit lambda only
// applies to the ccl modes and is forced to 0 elsewhere.
RunConfig with_mode(const RunConfig& cfg, Mode mode);

std::string run_config_json(const RunConfig& cfg);

}  // namespace pho
