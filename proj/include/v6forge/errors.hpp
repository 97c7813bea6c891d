#pragma once

#include <stdexcept>
#include <string>

namespace v6forge {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed textual input (addresses, files).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A word sequence violates the 32-word / index structure.
class SequenceError : public Error {
 public:
  using Error::Error;
};

/// No usable input sequences.
class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range id or position.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in an invalid order or state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A word is absent from the vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

/// A vector required to be nonzero has zero norm.
class NormError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument value.
class ParamError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data file.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace v6forge
