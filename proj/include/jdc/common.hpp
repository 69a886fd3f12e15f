// Copyright (c) the JDC project authors
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

#ifndef JDC_COMMON_HPP_
#define JDC_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace jdc {

// Error taxonomy shared across the library. Everything user-facing derives
// from Error so the CLI can map categories to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Unsupported image layout (channel count, bit depth, color type).
class UnsupportedChannels : public IoError {
 public:
  using IoError::IoError;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// A forward op produced NaN/Inf.
class NonFinite : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

// Bitstream was produced by a different model checkpoint.
class ModelMismatch : public DecodeError {
 public:
  using DecodeError::DecodeError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace jdc

#endif  // JDC_COMMON_HPP_
