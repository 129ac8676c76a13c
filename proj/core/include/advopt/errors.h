// Copyright 2026 The advopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADVOPT_ERRORS_H_
#define ADVOPT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace advopt {

// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operand shapes do not compose.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A^T A (or another Gram matrix) is numerically singular.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative routine hit its iteration cap. Carries the last estimate.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

// Training produced a NaN/Inf loss.
class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed model/dataset file. The message names the line or field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaVersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace advopt

#endif  // ADVOPT_ERRORS_H_
