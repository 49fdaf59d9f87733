// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace spatialcot {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched shapes, malformed config or manifest, empty template cells.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// An input value outside the operation's domain (e.g. non-positive depth).
class DomainError : public Error {
 public:
  using Error::Error;
};

class EmptyCloudError : public Error {
 public:
  using Error::Error;
};

/// Geometrically impossible input, such as a point behind the camera.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class InstantiationError : public Error {
 public:
  using Error::Error;
};

/// The scene cannot support the requested QA turns.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

/// Wrong number of turns per level handed to the assembler.
class CompositionError : public Error {
 public:
  using Error::Error;
};

/// A record failed its invariants and was not written.
class EmissionError : public Error {
 public:
  using Error::Error;
};

/// Broken internal contract, such as a gradient of the wrong shape.
class InternalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failure of an external client (captioner, validator, perceptual scorer).
/// `subject` names what was being processed: a conversation id or a frame pair.
class ServiceError : public Error {
 public:
  ServiceError(std::string subject, const std::string& what, bool retryable = true)
      : Error(subject + ": " + what), subject_(std::move(subject)), retryable_(retryable) {}

  const std::string& subject() const noexcept { return subject_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::string subject_;
  bool retryable_;
};

}  // namespace spatialcot
