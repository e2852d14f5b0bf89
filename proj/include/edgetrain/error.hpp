// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace edgetrain {

/// Broad failure class; the CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  kFormat,     // malformed model / data documents
  kCompile,    // graph, tiling or allocation infeasibility
  kNumerical,  // NaN, bounds violation, gradient check failure
  kIo,         // file system
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string origin, const std::string& what)
      : std::runtime_error(origin.empty() ? what : origin + ": " + what),
        category_(category),
        origin_(std::move(origin)) {}

  ErrorCategory category() const noexcept { return category_; }
  /// Module that raised the error (graph_ir, autodiff, tiler, ...).
  const std::string& origin() const noexcept { return origin_; }

 private:
  ErrorCategory category_;
  std::string origin_;
};

class FormatError : public Error {
 public:
  FormatError(std::string origin, const std::string& what)
      : Error(ErrorCategory::kFormat, std::move(origin), what) {}
};

class CompileError : public Error {
 public:
  CompileError(std::string origin, const std::string& what)
      : Error(ErrorCategory::kCompile, std::move(origin), what) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string origin, const std::string& what)
      : Error(ErrorCategory::kNumerical, std::move(origin), what) {}
};

class IoError : public Error {
 public:
  IoError(std::string origin, const std::string& what)
      : Error(ErrorCategory::kIo, std::move(origin), what) {}
};

}  // namespace edgetrain
