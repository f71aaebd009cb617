// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DMRSEG_ERROR_HPP
#define DMRSEG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dmrseg {

// All library failures derive from Error so callers can map them onto exit
// codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents do not line up with what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A label or class id outside the declared range.
class LabelError : public Error {
 public:
  using Error::Error;
};

// API misuse: wrong call order, missing prerequisite, bad argument value.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Stored indices that do not describe a valid pooling layout.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Messages name the field and byte offset.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid generator or run settings.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Non-finite values surfaced during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmrseg

#endif  // DMRSEG_ERROR_HPP
