#pragma once

#include <stdexcept>
#include <string>

namespace stratinv {

// Base for every error caused by bad input or an inconsistent domain state.
// The CLI maps these to exit code 1; anything else is a usage error or a bug.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document (not valid JSON, wrong field types).
class ParseError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Well-formed document that violates a named invariant.
class ValidationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Two sources disagree on the verdict of the same cell.
class MergeError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Corrupt or version-mismatched campaign snapshot.
class CheckpointError : public DomainError {
 public:
  using DomainError::DomainError;
};

// The runner could not orchestrate a batch (thread or pipe failure).
class OrchestrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stratinv
