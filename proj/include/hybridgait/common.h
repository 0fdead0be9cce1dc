/* Copyright (c) 2026 The HybridGait Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <stdexcept>
#include <string>

namespace hybridgait {

using Real = double;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or violated preconditions on in-memory values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete configuration files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Problems with the on-disk dataset (missing files, corrupt frames...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated or incompatible checkpoint archives.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridgait
