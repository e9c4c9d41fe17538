#pragma once

// Identifier types and the error hierarchy shared by every sdof module.

#include <compare>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace sdof {

/// Case-sensitive string identifier distinguished at compile time by Tag.
template <class Tag>
class Name {
 public:
  Name() = default;
  explicit Name(std::string value) : value_(std::move(value)) {}
  explicit Name(std::string_view value) : value_(value) {}
  explicit Name(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Name&, const Name&) = default;
  friend bool operator==(const Name&, const Name&) = default;

 private:
  std::string value_;
};

struct StageTag {};
struct IntentTag {};

using StageId = Name<StageTag>;
using IntentId = Name<IntentTag>;

/// Base of every fault raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown stage, intent or other element in a lookup.
class LookupError : public Error {
 public:
  LookupError(std::string element, const std::string& what)
      : Error(what), element_(std::move(element)) {}
  const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Duplicate registration or stale concurrent modification.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// A predicate name that the catalog cannot resolve.
class BindingError : public Error {
 public:
  BindingError(std::string predicate, const std::string& what)
      : Error(what), predicate_(std::move(predicate)) {}
  const std::string& predicate() const noexcept { return predicate_; }

 private:
  std::string predicate_;
};

/// Audit log corruption: sequence gaps, digest mismatches, misaligned inputs.
class IntegrityError : public Error {
 public:
  IntegrityError(long long first_bad_seq, const std::string& what)
      : Error(what), first_bad_seq_(first_bad_seq) {}
  explicit IntegrityError(const std::string& what) : Error(what) {}
  long long first_bad_seq() const noexcept { return first_bad_seq_; }

 private:
  long long first_bad_seq_ = -1;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Event store write or read failure.
class StorageError : public Error {
 public:
  using Error::Error;
};

/// Scenario or suite file does not match its schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdof

template <class Tag>
struct std::hash<sdof::Name<Tag>> {
  std::size_t operator()(const sdof::Name<Tag>& n) const noexcept {
    return std::hash<std::string>{}(n.str());
  }
};
