#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selfpro {

enum class ErrorKind {
  load,
  parse,
  shape,
  infeasible_split,
  sampling,
  argument,
  metric,
  pretext,
  divergence,
  tuning,
  split,
  similarity,
  prototype,
  config,
  io,
  numerical,
  usage,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library. The CLI maps `usage` to exit code 2
// and every other kind to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace selfpro
