#pragma once

#include <stdexcept>
#include <string>

namespace mcx {

// Error categories; they map 1:1 onto C API status codes and CLI exit codes.
enum class errc {
  invalid_argument = 1,  // bad configuration, bad design, bad parameters
  data = 2,              // malformed or inconsistent input data
  numeric = 3,           // singular matrices, non-PSD covariances, divergence
  io = 4,                // file system problems
};

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) { throw error(errc::invalid_argument, what); }
[[noreturn]] inline void throw_data(const std::string& what) { throw error(errc::data, what); }
[[noreturn]] inline void throw_numeric(const std::string& what) { throw error(errc::numeric, what); }
[[noreturn]] inline void throw_io(const std::string& what) { throw error(errc::io, what); }

}  // namespace mcx
