// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace prunepath {

// Base of every error raised by the library. Callers that only care about
// "something in prunepath failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

class LifecycleError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class CollinearityError : public Error {
public:
    using Error::Error;
};

class DependencyError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Raised by network backends.
class TransportError : public Error {
public:
    using Error::Error;
};

class CapabilityError : public Error {
public:
    using Error::Error;
};

}  // namespace prunepath
