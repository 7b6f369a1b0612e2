#pragma once

#include <stdexcept>
#include <string>

namespace kpl {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// DataError -> 3, NumericalError -> 4, usage errors are handled by the
// argument parser itself.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (files, images, archives).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Violated call contract: dimension mismatches, invalid arguments.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Optimization failures, non-finite values, unreachable targets.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace kpl
