#pragma once

#include <stdexcept>
#include <string>

namespace coreguard {

// Base of every error raised by the library. `kind()` is a stable,
// machine-parsable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// Shape or count mismatch.
class SizeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "size"; }
};

// A non-finite value appeared during a forward pass.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t layer)
      : Error(what), layer_(layer) {}
  const char* kind() const noexcept override { return "numeric"; }
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

// Bad user input: token out of range, invalid config, non-bijective key...
class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input"; }
};

// Enclave call order violated (no pad, pad reuse, decrypt without encrypt).
class ProtocolError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "protocol"; }
};

// Malformed, truncated or wrong-version file.
class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

// A locked model failed an equivalence identity.
class VerificationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "verification"; }
};

}  // namespace coreguard
