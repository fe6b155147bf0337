#pragma once

#include <stdexcept>
#include <string>

namespace semleak {

// Base for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SuiteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Network-level failure; callers may retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

// 401/403 from an endpoint. Never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

// The endpoint answered but the payload lacks what we need.
class MalformedResponseError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class ZeroNormError : public Error {
 public:
  using Error::Error;
};

// Statistic is undefined for the input (zero variance, all ties, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class AnnotationError : public Error {
 public:
  using Error::Error;
};

class UnknownSessionError : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

class UnknownItemError : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

class DuplicateLabelError : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

class IncompleteLabelsError : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

}  // namespace semleak
