#pragma once

#include <stdexcept>
#include <string>

namespace modiffe {

// Base for violations of a documented contract (bad shapes, bad ordering,
// bad parameters). The CLI maps these to exit code 2.
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public ContractError {
public:
    using ContractError::ContractError;
};

class ParameterError : public ContractError {
public:
    using ContractError::ContractError;
};

class BoundsError : public ContractError {
public:
    using ContractError::ContractError;
};

class DegenerateSplitError : public ContractError {
public:
    using ContractError::ContractError;
};

class OrderingError : public ContractError {
public:
    using ContractError::ContractError;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public ContractError {
public:
    using ContractError::ContractError;
};

// File-level failures. The CLI maps these to exit code 1.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public IoError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : IoError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace modiffe
