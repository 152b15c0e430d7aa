// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mrdt {

/// Malformed input text (corpus records, task files, config, ontology).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model container problems: bad magic, unsupported version, truncation.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrdt
