#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace htmvid {

enum class Errc {
  invalid_argument,
  index_out_of_range,
  length_mismatch,
  domain_error,
  bad_magic,
  truncated,
  version_mismatch,
  io_error,
  config_error,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::index_out_of_range: return "index_out_of_range";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::domain_error: return "domain_error";
    case Errc::bad_magic: return "bad_magic";
    case Errc::truncated: return "truncated";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::io_error: return "io_error";
    case Errc::config_error: return "config_error";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` distinguishes the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace htmvid
