#pragma once

#include <stdexcept>
#include <string>

namespace mve {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed data supplied by the caller: empty queries, dimension
/// mismatches, unparsable files.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error("invalid input: " + what) {}
};

/// A parameter outside its allowed range (p = 0, n_probe > n_list, ...).
class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& what) : Error("invalid config: " + what) {}
};

/// An index file that fails validation. `section()` names the part of the
/// file that could not be read.
class CorruptIndex : public Error {
 public:
  CorruptIndex(std::string section, const std::string& what)
      : Error("corrupt index [" + section + "]: " + what), section_(std::move(section)) {}

  const std::string& section() const noexcept { return section_; }

 private:
  std::string section_;
};

/// Internal invariant violated, e.g. a candidate that does not exist in the store.
class InternalConsistency : public Error {
 public:
  explicit InternalConsistency(const std::string& what)
      : Error("internal consistency: " + what) {}
};

}  // namespace mve
