#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "silica/checker.hpp"
#include "silica/diagnostics.hpp"

namespace silica {

enum ExitCode { kExitOk = 0, kExitDiagnostics = 1, kExitIo = 2, kExitInternal = 3 };

// Parse and check one source text.
struct Analysis {
  std::vector<Diagnostic> diagnostics;
  std::optional<CheckedProgram> program;  // set iff accepted
};

Analysis analyze(const std::string& source, const std::string& file);

std::optional<std::string> read_file(const std::filesystem::path& p);

struct RunOptions {
  std::size_t fuel = 10000;
  bool trace = false;
  bool verify = false;
};

int cmd_check(const std::string& path, std::ostream& out, bool color = false);
int cmd_run(const std::string& path, const RunOptions& opts, std::ostream& out, bool color = false);
int cmd_test(const std::string& dir, std::ostream& out, bool color = false);

struct CorpusCase {
  enum class Kind { Accept, Reject, Eval, Stuck };
  std::string name;
  std::filesystem::path program;
  Kind kind = Kind::Accept;
  std::vector<std::string> codes;  // Reject
  std::string outcome;             // Eval: exact outcome line
  std::string stuck;               // Stuck: reentrancy | bad-transition | nested-state-check
  std::size_t fuel = 10000;
  bool verify = true;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::string code, const std::string& msg) : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Reads <dir>/manifest.json. A directory with no entries at all is an
// empty corpus.
std::vector<CorpusCase> load_manifest(const std::filesystem::path& dir);

struct CaseResult {
  bool pass = false;
  std::string got;
  std::string expected;
};

CaseResult run_case(const CorpusCase& c);

}  // namespace silica
