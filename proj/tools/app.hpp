#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stratsense::cli {

inline constexpr const char* kToolVersion = "stratsense 1.0.0";

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kIoOrConfig = 2,
  kDesignFailed = 3,
};

/// "lo:hi:count" (linear), "lo:hi:count:log", or a comma list "a,b,c".
/// Throws std::invalid_argument on malformed input.
std::vector<double> parse_grid(std::string_view text);

/// %.17g, so every double round-trips.
std::string format_double(double v);

/// Files produced by one command, held in memory until the command succeeds.
class OutputSet {
 public:
  void add(std::string name, std::string contents);
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  /// Writes every file to a temporary sibling, then renames all of them into
  /// place. If any write fails, the temporaries are removed and nothing under
  /// the final names is touched. Throws std::runtime_error.
  void commit(const std::filesystem::path& dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Entry point shared by the executable and the tests. argv[0] is ignored.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stratsense::cli
