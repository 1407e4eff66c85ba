#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lsilt/config.hpp"

namespace lsilt {

/// Everything one CLI invocation needs. Precedence: flags > config file > defaults.
struct RunConfig {
  OptConfig opt;
  std::filesystem::path kernels_path;
  std::filesystem::path target_path;
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 7;
  bool emit_png = false;
  std::optional<std::filesystem::path> phi0_path;
  std::optional<std::filesystem::path> modulation_path;
};

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

/// Runs one subcommand (gen-kernels, tsdf, simulate, optimize, metrics, fracture).
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsilt
