#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace framerepeat::cli {

enum class Source { Default, File, Env, Flag };

const char* source_name(Source s);

inline constexpr const char* kEnvPrefix = "REPEATGAIN_";

// Flat "section.key" -> string settings with the layer each value came from.
// Layers are applied in order defaults, file, environment, flags; each one
// overwrites the previous.
class RunConfig {
 public:
  void declare(const std::string& key, const std::string& default_value);
  bool has(const std::string& key) const { return values_.contains(key); }

  // INI file; keys outside the declared set are a ConfigError.
  void load_file(const std::filesystem::path& path);
  // REPEATGAIN_<SECTION>_<KEY>, upper-cased.
  void load_env();
  void set(const std::string& key, const std::string& value, Source source);

  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  int integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  Source source(const std::string& key) const;

  static std::string env_name(const std::string& key);

  nlohmann::json to_json() const;
  void print(std::ostream& out) const;

 private:
  struct Setting {
    std::string value;
    Source source = Source::Default;
  };
  std::map<std::string, Setting> values_;
};

std::string format_number(double v);

}  // namespace framerepeat::cli
