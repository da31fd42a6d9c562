#pragma once

#include <stdexcept>
#include <string>

namespace getkos {

enum class ErrorKind {
  io,
  schema,
  empty_dataset,
  split,
  shape,
  empty_batch,
  divergence,
  morphism,
  search,
  format,
  version,
  corruption,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::empty_dataset: return "empty-dataset";
    case ErrorKind::split: return "split";
    case ErrorKind::shape: return "shape";
    case ErrorKind::empty_batch: return "empty-batch";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::morphism: return "morphism";
    case ErrorKind::search: return "search";
    case ErrorKind::format: return "format";
    case ErrorKind::version: return "version";
    case ErrorKind::corruption: return "corruption";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI exit
/// code mapping, the HTTP layer) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace getkos
