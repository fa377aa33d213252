// speakerkit/errors.h

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEAKERKIT_ERRORS_H_
#define SPEAKERKIT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace speakerkit {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor / matrix shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A numeric argument is outside its legal range (p >= 1, lr <= 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// An API was called in a state it does not support (backward on a
// non-scalar, CMN applied twice, embedding extraction in train mode, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// An index (class target, utterance id lookup) is out of range or missing.
class IndexError : public Error {
 public:
  using Error::Error;
};

// A config file or RunConfig is internally inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A text input (manifest, trial list, config) failed to parse.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input data violates a contract (duplicate ids, wrong sample rate, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// A signal or spectrogram is too short for the requested operation.
class InputTooShortError : public DataError {
 public:
  using DataError::DataError;
};

// A numerically degenerate input (zero-norm embedding, single-class
// score list) that makes the requested metric undefined.
class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace speakerkit

#endif  // SPEAKERKIT_ERRORS_H_
