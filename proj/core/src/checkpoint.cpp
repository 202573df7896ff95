#include "dlnlab/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dlnlab {

namespace {
constexpr const char* kMagic = "dlnlab-ckpt v1";
}

void Checkpoint::add(const std::string& name, const Array& value) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw IoError("checkpoint tensor name must be non-empty without spaces: \"" +
                  name + "\"");
  }
  if (tensors_.count(name)) throw IoError("duplicate checkpoint tensor: " + name);
  names_.push_back(name);
  tensors_.emplace(name, value);
}

const Array& Checkpoint::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw IoError("checkpoint tensor missing: " + name);
  return it->second;
}

bool Checkpoint::has(const std::string& name) const {
  return tensors_.count(name) > 0;
}

std::string Checkpoint::meta_str(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint meta missing: " + key);
  return it->second;
}

int64_t Checkpoint::meta_int(const std::string& key) const {
  return std::stoll(meta_str(key));
}

double Checkpoint::meta_double(const std::string& key) const {
  return std::strtod(meta_str(key).c_str(), nullptr);
}

void Checkpoint::set_meta_double(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  meta[key] = buf;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << kMagic << '\n';
  for (const auto& [k, v] : meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& name : names_) {
    const Array& a = tensors_.at(name);
    out << "tensor " << name << ' ' << a.shape.rows << ' ' << a.shape.cols
        << '\n';
  }
  out << "data\n";
  for (const auto& name : names_) {
    const Array& a = tensors_.at(name);
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError("bad checkpoint magic in " + path);
  }
  Checkpoint ck;
  struct Entry {
    std::string name;
    Shape shape;
  };
  std::vector<Entry> entries;
  while (std::getline(in, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      ls >> e.name >> e.shape.rows >> e.shape.cols;
      if (!ls || e.name.empty() || e.shape.rows <= 0 || e.shape.cols <= 0) {
        throw IoError("bad tensor manifest line in " + path + ": " + line);
      }
      entries.push_back(std::move(e));
    } else {
      throw IoError("unexpected manifest line in " + path + ": " + line);
    }
  }
  for (const auto& e : entries) {
    Array a = Array::zeros(e.shape);
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint data truncated in " + path);
    ck.add(e.name, a);
  }
  return ck;
}

}  // namespace dlnlab
