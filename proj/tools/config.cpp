#include "config.hpp"

#include "isfno/errors.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace isfno::cli {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string &s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    return s.substr(1, s.size() - 2);
  return s;
}

std::string read_all(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

double parse_real(const std::string &key, const std::string &text) {
  const char *begin = text.c_str();
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE)
    throw UsageError("'" + key + "' expects a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_u64(const std::string &key, const std::string &text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw UsageError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  return v;
}

} // namespace

void Settings::load_text(const std::string &text, const std::string &origin) {
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw UsageError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
    values_[section.empty() ? key : section + "." + key] = unquote(trim(line.substr(eq + 1)));
  }
}

void Settings::load_file(const std::filesystem::path &path) {
  if (path.extension() == ".json") {
    load_manifest(path);
    return;
  }
  load_text(read_all(path), path.string());
}

void Settings::load_manifest(const std::filesystem::path &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_all(path));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_object())
    throw FormatError(path.string() + " has no config object");
  for (const auto &[k, v] : j["config"].items())
    values_[k] = v.is_string() ? v.get<std::string>() : v.dump();
}

void Settings::set(const std::string &key, const std::string &value) { values_[key] = value; }

bool Settings::has(const std::string &key) const { return values_.contains(key); }

std::string Settings::fetch(const std::string &key, const std::string &fallback) {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  used_[key] = v;
  return v;
}

std::string Settings::str(const std::string &key, const std::string &fallback) {
  return fetch(key, fallback);
}

std::string Settings::required(const std::string &key, const std::string &flag) {
  if (!has(key))
    throw UsageError("missing required option " + flag);
  return fetch(key, {});
}

double Settings::real(const std::string &key, double fallback) {
  return parse_real(key, fetch(key, format_real(fallback)));
}

std::size_t Settings::count(const std::string &key, std::size_t fallback) {
  return static_cast<std::size_t>(u64(key, fallback));
}

std::uint64_t Settings::u64(const std::string &key, std::uint64_t fallback) {
  return parse_u64(key, fetch(key, std::to_string(fallback)));
}

bool Settings::flag(const std::string &key, bool fallback) {
  const std::string v = fetch(key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw UsageError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> Settings::reals(const std::string &key, const std::vector<double> &fallback) {
  std::vector<double> out;
  for (const auto &item : split_list(fetch(key, join_reals(fallback)), ','))
    out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::size_t> Settings::extents(const std::string &key,
                                           const std::vector<std::size_t> &fallback) {
  std::vector<std::size_t> out;
  for (const auto &item : split_list(fetch(key, join_extents(fallback)), 'x'))
    out.push_back(static_cast<std::size_t>(parse_u64(key, item)));
  if (out.empty())
    throw UsageError("'" + key + "' expects extents like 64 or 32x32");
  return out;
}

std::optional<double> Settings::maybe_real(const std::string &key) {
  if (!has(key))
    return std::nullopt;
  return parse_real(key, fetch(key, {}));
}

nlohmann::json Settings::resolved() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[k, v] : values_)
    j[k] = v;
  for (const auto &[k, v] : used_)
    j[k] = v;
  return j;
}

nlohmann::json Settings::hashable() const {
  nlohmann::json j = resolved();
  j.erase("run.out");
  return j;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_reals(const std::vector<double> &v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + format_real(v[i]);
  return out;
}

std::string join_extents(const std::vector<std::size_t> &v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "x" : "") + std::to_string(v[i]);
  return out;
}

void write_manifest(const std::filesystem::path &dir, const std::string &subcommand,
                    const Settings &settings, int threads, const nlohmann::json &outputs) {
  const nlohmann::json j = {{"tool", "isfno"},
                            {"version", kToolVersion},
                            {"subcommand", subcommand},
                            {"threads", threads},
                            {"config", settings.resolved()},
                            {"outputs", outputs}};
  const auto path = dir / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os)
    throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os)
    throw IoError("write failed for " + path.string());
}

} // namespace isfno::cli
