// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace graphroute {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, records, schemas).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition (bad argument, bad config).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Failure while computing: non-finite values, unreachable providers, I/O.
class RuntimeError : public Error {
 public:
  using Error::Error;
};

}  // namespace graphroute
