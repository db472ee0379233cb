#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "bypass/cli.hpp"
#include "bypass/error.hpp"

namespace bypass::cli {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> tokenize(std::string_view cmd) {
  std::istringstream in{std::string(cmd)};
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

// Output paths named by a stage command: any --out / --*-out option, and
// every file below an --out-dir.
std::vector<fs::path> stage_outputs(const std::vector<std::string>& tokens) {
  std::vector<fs::path> outputs;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string flag = tokens[i];
    std::string value;
    if (flag.rfind("--", 0) != 0) continue;
    if (const auto eq = flag.find('='); eq != std::string::npos) {
      value = flag.substr(eq + 1);
      flag.resize(eq);
    } else if (i + 1 < tokens.size()) {
      value = tokens[i + 1];
    }
    if (value.empty()) continue;
    const bool is_out =
        flag == "--out" || (flag.size() > 6 && flag.compare(flag.size() - 4, 4, "-out") == 0);
    if (is_out) {
      outputs.emplace_back(value);
    } else if (flag == "--out-dir" && fs::is_directory(value)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(value))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      outputs.insert(outputs.end(), files.begin(), files.end());
    }
  }
  return outputs;
}

class CurrentPathGuard {
 public:
  explicit CurrentPathGuard(const fs::path& dir) : saved_(fs::current_path()) {
    fs::current_path(dir);
  }
  ~CurrentPathGuard() {
    std::error_code ec;
    fs::current_path(saved_, ec);
  }
  CurrentPathGuard(const CurrentPathGuard&) = delete;
  CurrentPathGuard& operator=(const CurrentPathGuard&) = delete;

 private:
  fs::path saved_;
};

}  // namespace

RunManifest parse_manifest(std::istream& in) {
  RunManifest manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) throw ParseError(lineno, "malformed stage header");
      manifest.stages.push_back(Stage{std::string(trim(text.substr(1, text.size() - 2))), {}, {}});
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError(lineno, "expected key = value");
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    if (manifest.stages.empty()) {
      if (key != "tool") throw ParseError(lineno, "unknown top-level key '" + std::string(key) + "'");
      manifest.tool = value;
      continue;
    }
    Stage& stage = manifest.stages.back();
    if (key == "cmd") {
      if (!stage.cmd.empty()) throw ParseError(lineno, "duplicate cmd in stage " + stage.name);
      stage.cmd = value;
    } else if (key.rfind("digest.", 0) == 0 && key.size() > 7) {
      stage.digests.emplace_back(std::string(key.substr(7)), std::string(value));
    } else {
      throw ParseError(lineno, "unknown key '" + std::string(key) + "'");
    }
  }
  for (const auto& s : manifest.stages)
    if (s.cmd.empty()) throw ParseError(lineno, "stage " + s.name + " has no cmd");
  return manifest;
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return parse_manifest(in);
}

void write_manifest(const RunManifest& manifest, std::ostream& out) {
  out << "tool = " << manifest.tool << '\n';
  for (const auto& s : manifest.stages) {
    out << "\n[" << s.name << "]\ncmd = " << s.cmd << '\n';
    for (const auto& [path, digest] : s.digests) out << "digest." << path << " = " << digest << '\n';
  }
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

int run_pipeline(const fs::path& manifest_path, const PipelineOptions& options, std::ostream& out,
                 std::ostream& err) {
  if (!fs::is_regular_file(manifest_path)) {
    err << "error: manifest not found: " << manifest_path.string() << '\n';
    return kExitMissingInput;
  }
  RunManifest manifest;
  try {
    manifest = read_manifest(manifest_path);
  } catch (const Error& e) {
    err << "error: " << manifest_path.string() << ": " << e.what() << '\n';
    return kExitError;
  }
  if (!manifest.tool.empty() && manifest.tool != kToolVersion)
    err << "warning: manifest written by '" << manifest.tool << "', running " << kToolVersion << '\n';

  const fs::path completed =
      options.write_completed.empty() ? fs::path{} : fs::absolute(options.write_completed);
  RunManifest done = manifest;
  done.tool = kToolVersion;
  {
    const fs::path dir = fs::absolute(manifest_path).parent_path();
    CurrentPathGuard guard(dir);
    for (std::size_t i = 0; i < manifest.stages.size(); ++i) {
      const Stage& stage = manifest.stages[i];
      const auto tokens = tokenize(stage.cmd);
      if (tokens.empty() || tokens.front() == "run") {
        err << "stage " << stage.name << ": invalid cmd\n";
        return kExitStageFailure;
      }
      out << "[" << stage.name << "] " << stage.cmd << '\n';
      const int code = run_cli(tokens, out, err);
      if (code == kExitMissingInput) {
        err << "stage " << stage.name << ": missing input\n";
        return kExitMissingInput;
      }
      if (code != kExitOk) {
        err << "stage " << stage.name << ": failed with status " << code << '\n';
        return kExitStageFailure;
      }
      for (const auto& [path, expected] : stage.digests) {
        if (!fs::is_regular_file(path)) {
          err << "stage " << stage.name << ": declared output " << path << " was not written\n";
          return kExitStageFailure;
        }
        const std::string actual = file_sha256(path);
        if (actual != expected) {
          err << "stage " << stage.name << ": digest mismatch for " << path << "\n  expected "
              << expected << "\n  actual   " << actual << '\n';
          return kExitDigestMismatch;
        }
      }
      auto& digests = done.stages[i].digests;
      for (const auto& p : stage_outputs(tokens)) {
        if (!fs::is_regular_file(p)) continue;
        const std::string key = p.lexically_normal().generic_string();
        const std::string digest = file_sha256(p);
        auto it = std::find_if(digests.begin(), digests.end(),
                               [&](const auto& d) { return d.first == key; });
        if (it == digests.end()) digests.emplace_back(key, digest);
        else it->second = digest;
      }
    }
  }
  if (!completed.empty()) {
    if (completed.has_parent_path()) fs::create_directories(completed.parent_path());
    std::ofstream o(completed, std::ios::binary);
    if (!o) {
      err << "error: cannot write " << completed.string() << '\n';
      return kExitError;
    }
    write_manifest(done, o);
  }
  return kExitOk;
}

}  // namespace bypass::cli
