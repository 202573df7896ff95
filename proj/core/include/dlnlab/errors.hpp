#ifndef DLNLAB_ERRORS_HPP
#define DLNLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dlnlab {

// Failure classes map one-to-one onto CLI exit codes.
enum class ErrorClass { generic = 1, config = 2, io = 3, shape = 4, dataset = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& msg)
      : std::runtime_error(msg), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorClass::config, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorClass::io, msg) {}
};

struct MalformedRecord : Error {
  MalformedRecord(size_t line, const std::string& msg)
      : Error(ErrorClass::io, "line " + std::to_string(line) + ": " + msg),
        line_number(line) {}
  size_t line_number;
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error(ErrorClass::shape, msg) {}
};

struct IndexOutOfRange : Error {
  explicit IndexOutOfRange(const std::string& msg) : Error(ErrorClass::shape, msg) {}
};

struct NotScalar : Error {
  explicit NotScalar(const std::string& msg) : Error(ErrorClass::shape, msg) {}
};

struct NotADistribution : Error {
  explicit NotADistribution(const std::string& msg) : Error(ErrorClass::shape, msg) {}
};

struct EmptyInput : Error {
  explicit EmptyInput(const std::string& msg) : Error(ErrorClass::dataset, msg) {}
};

struct EmptyAfterTokenize : Error {
  explicit EmptyAfterTokenize(const std::string& msg) : Error(ErrorClass::dataset, msg) {}
};

struct MissingIdf : Error {
  explicit MissingIdf(const std::string& msg) : Error(ErrorClass::dataset, msg) {}
};

struct DatasetTooSmall : Error {
  explicit DatasetTooSmall(const std::string& msg) : Error(ErrorClass::dataset, msg) {}
};

struct MissingDlnCheckpoint : Error {
  explicit MissingDlnCheckpoint(const std::string& msg) : Error(ErrorClass::config, msg) {}
};

}  // namespace dlnlab

#endif  // DLNLAB_ERRORS_HPP
