#pragma once

// Run settings: flat "section.key" values merged from a key=value config
// file (or a previous run's manifest) and command-line overrides.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isfno::cli {

inline constexpr const char *kToolVersion = "0.1.0";

/// Bad or missing user input; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Settings {
public:
  /// Reads "[section]" headers and "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path &path);
  /// Reads the "config" object of a manifest written by an earlier run.
  void load_manifest(const std::filesystem::path &path);
  void load_text(const std::string &text, const std::string &origin);

  void set(const std::string &key, const std::string &value);
  bool has(const std::string &key) const;

  std::string str(const std::string &key, const std::string &fallback);
  std::string required(const std::string &key, const std::string &flag);
  double real(const std::string &key, double fallback);
  std::size_t count(const std::string &key, std::size_t fallback);
  std::uint64_t u64(const std::string &key, std::uint64_t fallback);
  bool flag(const std::string &key, bool fallback);
  std::vector<double> reals(const std::string &key, const std::vector<double> &fallback);
  std::vector<std::size_t> extents(const std::string &key, const std::vector<std::size_t> &fallback);
  std::optional<double> maybe_real(const std::string &key);

  /// Every value read so far (with defaults filled in) plus unread inputs.
  nlohmann::json resolved() const;
  /// resolved() without the output directory, for result hashes.
  nlohmann::json hashable() const;

private:
  std::string fetch(const std::string &key, const std::string &fallback);

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> used_;
};

std::string format_real(double v);
std::string join_reals(const std::vector<double> &v);
std::string join_extents(const std::vector<std::size_t> &v);

/// manifest.json with tool version, subcommand, thread count, resolved
/// settings and produced files.
void write_manifest(const std::filesystem::path &dir, const std::string &subcommand,
                    const Settings &settings, int threads,
                    const nlohmann::json &outputs);

} // namespace isfno::cli
