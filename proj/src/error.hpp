#pragma once

#include <stdexcept>
#include <string>

namespace ffinet {

enum class ErrKind {
  dim,       // shape / dimension mismatch
  config,    // invalid configuration value
  io,        // file system failure
  format,    // malformed container / checkpoint payload
  numeric,   // NaN/Inf surfaced by a finite check
  contract,  // API misuse (non-scalar loss, missing record, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void check(bool cond, ErrKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

inline void check_dim(bool cond, const std::string& msg) { check(cond, ErrKind::dim, msg); }
inline void check_config(bool cond, const std::string& msg) { check(cond, ErrKind::config, msg); }

}  // namespace ffinet
