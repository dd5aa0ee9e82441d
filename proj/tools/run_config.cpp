#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <iomanip>

#include "framerepeat/errors.hpp"

namespace framerepeat::cli {

namespace pt = boost::property_tree;

const char* source_name(Source s) {
  switch (s) {
    case Source::Default: return "default";
    case Source::File: return "file";
    case Source::Env: return "env";
    case Source::Flag: return "flag";
  }
  return "?";
}

std::string format_number(double v) { return nlohmann::json(v).dump(); }

namespace {

bool is_secret(const std::string& key, const std::string& value) {
  return key.ends_with("_token") && !value.empty();
}

}  // namespace

void RunConfig::declare(const std::string& key, const std::string& default_value) {
  values_[key] = {default_value, Source::Default};
}

void RunConfig::set(const std::string& key, const std::string& value, Source source) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown setting '" + key + "'");
  it->second = {value, source};
}

void RunConfig::load_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("bad config file: " + std::string(e.what()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config file: '" + section + "' is outside any section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      // Sections that the current command does not use are tolerated.
      if (!has(full)) {
        const bool known_section = std::any_of(values_.begin(), values_.end(), [&](const auto& kv) {
          return kv.first.compare(0, section.size() + 1, section + ".") == 0;
        });
        if (known_section) throw ConfigError("config file: unknown key '" + full + "'");
        continue;
      }
      set(full, value.data(), Source::File);
    }
  }
}

std::string RunConfig::env_name(const std::string& key) {
  std::string name = kEnvPrefix;
  for (char c : key) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

void RunConfig::load_env() {
  for (auto& [key, setting] : values_) {
    if (const char* v = std::getenv(env_name(key).c_str())) setting = {v, Source::Env};
  }
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InternalError("undeclared setting '" + key + "'");
  return it->second.value;
}

Source RunConfig::source(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InternalError("undeclared setting '" + key + "'");
  return it->second.source;
}

double RunConfig::real(const std::string& key) const {
  const std::string& s = str(key);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  const std::string& s = str(key);
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(key + ": out of range");
  return v;
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

int RunConfig::integer(const std::string& key) const {
  const std::string& s = str(key);
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

bool RunConfig::boolean(const std::string& key) const {
  std::string s = str(key);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + s + "'");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, setting] : values_)
    j[key] = {{"value", is_secret(key, setting.value) ? "<redacted>" : setting.value},
              {"source", source_name(setting.source)}};
  return j;
}

void RunConfig::print(std::ostream& out) const {
  std::size_t width = 0;
  for (const auto& kv : values_) width = std::max(width, kv.first.size());
  out << "effective config:\n";
  for (const auto& [key, setting] : values_) {
    const bool secret = is_secret(key, setting.value);
    out << "  " << std::left << std::setw(static_cast<int>(width)) << key << " = "
        << (secret ? "<redacted>" : setting.value) << "  [" << source_name(setting.source) << "]\n";
  }
}

}  // namespace framerepeat::cli
