#pragma once

#include <stdexcept>
#include <string>

namespace medfab {

/// Broad failure class. The CLI maps each category onto its exit code.
enum class ErrorCategory {
  kConfig,    // exit 2
  kProvider,  // exit 3
  kData,      // exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, "config error: " + what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorCategory::kData, "data error: " + what) {}
};

/// A caller violated an operation precondition (empty input, bad window...).
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what)
      : Error(ErrorCategory::kData, "precondition failed: " + what) {}
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what)
      : Error(ErrorCategory::kProvider, "provider error: " + what) {}
};

class AuthError : public ProviderError {
 public:
  explicit AuthError(const std::string& what) : ProviderError("auth: " + what) {}
};

/// Strict replay lookup found no fixture for a request digest.
class ReplayMissError : public ProviderError {
 public:
  explicit ReplayMissError(const std::string& digest)
      : ProviderError("replay miss for digest " + digest), digest_(digest) {}

  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

/// An LLM kept answering outside the required format after all re-asks.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::string raw)
      : Error(ErrorCategory::kData, what), raw_(std::move(raw)) {}

  const std::string& raw_output() const noexcept { return raw_; }

 private:
  std::string raw_;
};

int exit_code(ErrorCategory category) noexcept;

}  // namespace medfab
