// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace umst {

// Error taxonomy mirrors the CLI exit codes: manifest/config problems exit
// with 2, numerical failures with 3, I/O failures with 4.
class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace umst
