#ifndef DLNLAB_RUNCONFIG_HPP
#define DLNLAB_RUNCONFIG_HPP

#include <map>
#include <string>

namespace dlnlab {

// Sectioned key/value config file:
//
//   [pairgen]
//   count = 20000
//   p = 0.25
//
// Sections: paths, seeds, pairgen, dln, captioner. Unknown sections or keys
// are rejected; every path named in [paths] must exist when the file is
// validated. Command-line flags override file values.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_string(const std::string& text,
                                const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  int64_t get_int(const std::string& section, const std::string& key,
                  int64_t fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

 private:
  void validate(const std::string& origin) const;
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace dlnlab

#endif  // DLNLAB_RUNCONFIG_HPP
