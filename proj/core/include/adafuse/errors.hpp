#pragma once

#include <stdexcept>
#include <string>

namespace adafuse {

// Root of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Encoded context is longer than the model's capability.
class ContextOverflowError : public Error {
 public:
  using Error::Error;
};

// Transport failure, timeout or server-side failure of a remote provider.
class ProviderUnavailableError : public Error {
 public:
  using Error::Error;
};

// prefix||continuation does not split into a prefix encoding plus continuation tokens.
class EncodingMismatchError : public Error {
 public:
  using Error::Error;
};

class InvalidTokenError : public Error {
 public:
  using Error::Error;
};

// A remote response violated the wire schema or its ordering guarantees.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class UnreachableContextError : public Error {
 public:
  using Error::Error;
};

class InsufficientCandidatesError : public Error {
 public:
  using Error::Error;
};

class EmptyWordError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

class UnscorableError : public Error {
 public:
  using Error::Error;
};

// Malformed model file, config file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace adafuse
