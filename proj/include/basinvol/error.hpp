#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace basinvol {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or widths that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Bad arguments to a numerical routine (empty dataset, alpha <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (IDX files, caches, checkpoints).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid experiment configuration; `field` names the offending key path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& message)
        : Error("diverged at epoch " + std::to_string(epoch) + ": " + message), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace basinvol
