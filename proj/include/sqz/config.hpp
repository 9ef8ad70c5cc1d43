#pragma once

// Sectioned key = value configuration. Every key has a default; unknown
// sections or keys are rejected so typos never pass silently.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sqz {

class PipelineConfig {
 public:
  /// All defaults resolved.
  PipelineConfig();

  static PipelineConfig from_file(const std::string& path);
  static PipelineConfig parse(std::istream& is, const std::string& origin = "<config>");

  /// Applies "section.key=value".
  void set_assignment(const std::string& assignment);
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& get(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
  std::vector<int> get_ints(const std::string& section, const std::string& key) const;

  /// The fully resolved document in the same syntax it was read in.
  void write(std::ostream& os) const;
  std::string to_string() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace sqz
