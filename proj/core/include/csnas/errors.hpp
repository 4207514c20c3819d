/* Copyright 2026 The csnas Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csnas {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Search-space parameters out of range (e.g. zero intermediate nodes).
class InvalidSpaceError : public Error {
 public:
  using Error::Error;
};

/// Malformed categorical encoding. Carries the offending position.
class EncodingError : public Error {
 public:
  EncodingError(const std::string& what, std::size_t index)
      : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Input outside an operation's domain, e.g. a zero-norm embedding.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate value. `layer` is -1 when not attributable.
class NumericalFault : public Error {
 public:
  explicit NumericalFault(const std::string& what, int layer = -1)
      : Error(layer >= 0 ? what + " (layer " + std::to_string(layer) + ")" : what),
        layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// Shapes that cannot be realized (dimension mismatch, infeasible network).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad on-disk data: wrong record size, bad magic, truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration. `key` is the dotted path of the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace csnas
