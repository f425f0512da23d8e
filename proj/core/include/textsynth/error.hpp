// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <stdexcept>
#include <string>

namespace textsynth {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// File missing, undecodable, or unwritable; message carries the path.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Caller violated a documented precondition.
class InvalidArgument : public Error {
public:
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

// Numerical failure: singular matrix, non-finite tensor value, divergence.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

}  // namespace textsynth
