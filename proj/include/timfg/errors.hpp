// Copyright 2026 The timfg Authors.
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

#ifndef TIMFG_ERRORS_HPP_
#define TIMFG_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace timfg {

// Bad argument values: out-of-range states or actions, malformed vectors.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Model or experiment configuration that cannot be used as given.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A valid request that this implementation does not cover (e.g. exact
// aggregate chains for d != 2).
class UnsupportedError : public std::runtime_error {
 public:
  explicit UnsupportedError(const std::string& what) : std::runtime_error(what) {}
};

// Truncation horizon too short for the requested tail tolerance.
class HorizonError : public std::runtime_error {
 public:
  HorizonError(const std::string& what, int required)
      : std::runtime_error(what), required_horizon(required) {}
  int required_horizon;
};

}  // namespace timfg

#endif  // TIMFG_ERRORS_HPP_
