// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace layered {

enum class ErrorKind {
    InvalidInput,
    DegenerateGeometry,
    Format,
    Usage,
    SingularBlend,
    SamplingStarvation,
    Divergence,
    UndefinedMetric,
    Io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` lets callers map
/// failures to exit codes without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace layered
