#include "dlnlab/runconfig.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dlnlab/errors.hpp"

namespace dlnlab {

namespace {

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"paths",
     {"corpus", "records", "dln_checkpoint", "cap_checkpoint", "idf_corpus",
      "vocab"}},
    {"seeds", {"root"}},
    {"pairgen", {"count", "p", "ops", "corpus_sentences"}},
    {"dln",
     {"d_model", "heads", "layers", "d_ff", "head_hidden1", "head_hidden2",
      "max_pair_len", "lambda_bleu", "lambda_meteor", "lambda_cider", "lr",
      "epochs", "batch", "min_count"}},
    {"captioner",
     {"lambda_bleu", "lambda_meteor", "lambda_cider", "lambda_fc", "lambda_mc",
      "lambda_oc", "lambda_ac", "ramp_start", "ramp_end", "ramp_max", "epochs",
      "batch", "lr", "dln_unfreeze", "proj_dim", "hidden", "embed_dim",
      "att_dim", "max_decode", "subjects", "actions", "frames", "sigma",
      "train_size", "val_size", "test_size"}},
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

RunConfig RunConfig::parse_string(const std::string& text,
                                  const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": key outside any section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (cfg.sections_[section].count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key " + section + "." + key);
    }
    cfg.sections_[section][key] = value;
  }
  cfg.validate(origin);
  return cfg;
}

void RunConfig::validate(const std::string& origin) const {
  for (const auto& [section, kv] : sections_) {
    auto it = kKnownKeys.find(section);
    if (it == kKnownKeys.end()) {
      throw ConfigError(origin + ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : kv) {
      if (!it->second.count(key)) {
        throw ConfigError(origin + ": unknown key " + section + "." + key);
      }
      if (section == "paths" && !std::filesystem::exists(value)) {
        throw ConfigError(origin + ": path " + section + "." + key + " = " +
                          value + " does not exist");
      }
    }
  }
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::string RunConfig::get_str(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return fallback;
  auto kt = it->second.find(key);
  return kt == it->second.end() ? fallback : kt->second;
}

int64_t RunConfig::get_int(const std::string& section, const std::string& key,
                           int64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_str(section, key, "");
  try {
    size_t used = 0;
    const int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config value " + section + "." + key + " = \"" + v +
                      "\" is not an integer");
  }
}

double RunConfig::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_str(section, key, "");
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty()) {
    throw ConfigError("config value " + section + "." + key + " = \"" + v +
                      "\" is not a number");
  }
  return out;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_str(section, key, "");
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config value " + section + "." + key + " = \"" + v +
                    "\" is not a boolean");
}

}  // namespace dlnlab
