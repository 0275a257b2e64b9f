// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_ERRORS_HPP
#define DMLMC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dmlmc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScheduleError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

struct StructureError : Error {
    using Error::Error;
};

struct AdapterError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct RateUnavailableError : Error {
    using Error::Error;
};

}  // namespace dmlmc

#endif  // DMLMC_ERRORS_HPP
