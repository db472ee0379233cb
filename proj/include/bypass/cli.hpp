#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bypass::cli {

inline constexpr std::string_view kToolVersion = "bypasslab 1.0.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitUsage = 2,
  kExitMissingInput = 3,
  kExitStageFailure = 4,
  kExitDigestMismatch = 5,
};

/// Runs one invocation. `args` excludes the program name. Normal output
/// goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// ---------------------------------------------------------------- manifest
//
//   tool = bypasslab 1.0.0
//
//   [trace]
//   cmd = gen-trace --kind region-mix --length 20000 --seed 7 --out trace.csv
//   digest.trace.csv = 5f3c...
//
// Blank lines and lines starting with '#' are ignored. `cmd` is split on
// whitespace (no quoting). Relative paths resolve against the manifest's
// directory.

struct Stage {
  std::string name;
  std::string cmd;
  std::vector<std::pair<std::string, std::string>> digests;  // path, sha256 hex
};

struct RunManifest {
  std::string tool;
  std::vector<Stage> stages;
};

RunManifest parse_manifest(std::istream& in);
RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RunManifest& manifest, std::ostream& out);

/// Lowercase hex SHA-256 of the file's bytes.
std::string file_sha256(const std::filesystem::path& path);

struct PipelineOptions {
  /// When set, the manifest is rewritten here with the digest of every
  /// stage output filled in.
  std::filesystem::path write_completed;
};

/// Executes the stages in order and stops at the first failure, naming the
/// stage on `err`. Returns kExitMissingInput, kExitStageFailure or
/// kExitDigestMismatch accordingly.
int run_pipeline(const std::filesystem::path& manifest_path, const PipelineOptions& options,
                 std::ostream& out, std::ostream& err);

}  // namespace bypass::cli
