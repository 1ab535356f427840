#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace ensctl::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutDirEnv = "ENSCTL_OUT_DIR";

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3, kToleranceNotMet = 4 };

struct RunConfig {
  std::string command;  // synth | simulate | dpss | qp | demo | diagnose
  std::string demo;     // case1 | case2 | amplitudes | horizons
  std::filesystem::path spec_path;
  std::filesystem::path control_path;
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;

  // dpss
  std::size_t N = 8;
  double W = 0.2;
  std::size_t k = 0;
  std::string method = "tridiagonal";
  double kappa_floor = 1e-14;

  // qp
  double T = 1.0;
  std::size_t n = 0;  // 0: spacing rule, at least 51 samples
  std::size_t starts = 10;
  std::string weighting = "trapezoid";

  // harmonic demos
  std::size_t freq_nodes = 1001;
  std::size_t time_nodes = 1001;
  double eps = 5e-8;

  nlohmann::json echo() const;
};

/// Output directory when none is given: $ENSCTL_OUT_DIR, else ./ensctl-out.
std::filesystem::path default_out_dir();

/// Parses argv. Throws ParameterError on invalid input; returns a config
/// with an empty command when only help was requested.
RunConfig parse_args(int argc, const char* const* argv, std::ostream& out);

/// Executes one command, writing artifacts and manifest.json into out_dir.
/// Throws the library's exceptions; main_entry maps them onto exit codes.
void run(const RunConfig& config, std::ostream& log);

/// parse_args + run with the exit-code mapping.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ensctl::cli
