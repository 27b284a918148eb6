#pragma once

#include <stdexcept>
#include <string>

namespace pointode {

// Coarse error categories, mirrored one-to-one by the C API status codes.
enum class errc {
  invalid_argument,  // bad parameter, precondition violation
  io,                // file missing / unreadable / unwritable
  format,            // parseable file with bad magic, version, or layout
  shape,             // tensor or plan dimensions disagree with the config
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace pointode
