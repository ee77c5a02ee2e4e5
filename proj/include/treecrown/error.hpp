// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace treecrown {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad data or arguments: malformed files, out-of-range pixels, empty inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent configuration (band roles, config keys, paths).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// No terrain cell could be found for an above-ground height query and no
// fallback height mode was configured.
class NoTerrainError : public InputError {
 public:
  using InputError::InputError;
};

// A broken internal invariant. Indicates a bug rather than a data condition.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace treecrown
