// include/rtrack/errors.hpp

// Copyright 2026  rtrack authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RTRACK_ERRORS_HPP_
#define RTRACK_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace rtrack {

struct Error : std::runtime_error {
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

#define RTRACK_DEFINE_ERROR(Name)                                  \
  struct Name : Error {                                            \
    explicit Name(const std::string &msg) : Error(#Name ": " + msg) {} \
  }

RTRACK_DEFINE_ERROR(InvalidMatrix);
RTRACK_DEFINE_ERROR(OrientationError);
RTRACK_DEFINE_ERROR(InvalidThreshold);
RTRACK_DEFINE_ERROR(InvalidTemperature);
RTRACK_DEFINE_ERROR(ShapeError);
RTRACK_DEFINE_ERROR(NumericError);
RTRACK_DEFINE_ERROR(InvalidConfig);
RTRACK_DEFINE_ERROR(InvalidCorpus);
RTRACK_DEFINE_ERROR(InputTooShort);
RTRACK_DEFINE_ERROR(InfeasibleAlignment);
RTRACK_DEFINE_ERROR(SupervisionShapeError);
RTRACK_DEFINE_ERROR(InvalidInput);
RTRACK_DEFINE_ERROR(InvalidSpan);
RTRACK_DEFINE_ERROR(NoScoredFrames);
RTRACK_DEFINE_ERROR(InvalidOperation);
RTRACK_DEFINE_ERROR(IoError);
RTRACK_DEFINE_ERROR(ParseError);

#undef RTRACK_DEFINE_ERROR

}  // namespace rtrack

#endif  // RTRACK_ERRORS_HPP_
