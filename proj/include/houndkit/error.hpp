/*
 * SPDX-FileCopyrightText: Copyright 2026 The houndkit authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace houndkit {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Index or length outside a trace.
class BoundsError : public Error {
  public:
    using Error::Error;
};

/// A value violates an operation's precondition.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// Tensor shapes disagree with the model configuration.
class ShapeError : public Error {
  public:
    using Error::Error;
};

/// Inconsistent configuration (frequency pools, presets, config files).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// A file does not follow its declared on-disk format or version.
class FormatError : public Error {
  public:
    using Error::Error;
};

/// Missing, unreadable or unwritable file.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Content hash disagrees with the one recorded by the producing stage.
class HashMismatchError : public Error {
  public:
    using Error::Error;
};

} // namespace houndkit
