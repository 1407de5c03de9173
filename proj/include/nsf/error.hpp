#pragma once

#include <stdexcept>
#include <string>

namespace nsf {

// Failure categories surfaced to callers; the CLI maps these onto exit codes.
enum class ErrorCode {
  io,                     // file missing, unreadable, or unwritable
  unsupported_format,     // not an 8-bit grayscale PGM/PNG
  invalid_image,          // bad dimensions, size mismatch, non-finite samples
  incompatible_pair,      // paired images differ in size
  invalid_spec,           // malformed decomposition specification
  unsupported_filter,     // unknown pyramid filter name
  too_small,              // image too small for the requested operation
  invalid_decomposition,  // decomposition fails structural validation
  out_of_range,           // scale or direction index out of range
  invalid_parameter,      // numeric parameter outside its domain
  bad_config,             // unreadable or invalid configuration
  empty_batch,            // batch directory contains no usable pairs
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace nsf
