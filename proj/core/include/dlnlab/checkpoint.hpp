#ifndef DLNLAB_CHECKPOINT_HPP
#define DLNLAB_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

#include "dlnlab/tensor.hpp"

namespace dlnlab {

// Flat binary container of named shape-tagged float64 arrays with a text
// manifest up front. Values round-trip bit-exactly.
//
//   dlnlab-ckpt v1
//   meta <key> <value>
//   tensor <name> <rows> <cols>
//   ...
//   data
//   <raw little-endian doubles, manifest order>
class Checkpoint {
 public:
  std::map<std::string, std::string> meta;

  void add(const std::string& name, const Array& value);
  const Array& get(const std::string& name) const;  // IoError if missing
  bool has(const std::string& name) const;
  size_t tensor_count() const { return names_.size(); }

  std::string meta_str(const std::string& key) const;
  int64_t meta_int(const std::string& key) const;
  double meta_double(const std::string& key) const;
  void set_meta_double(const std::string& key, double v);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::map<std::string, Array> tensors_;
};

}  // namespace dlnlab

#endif  // DLNLAB_CHECKPOINT_HPP
