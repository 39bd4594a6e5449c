#pragma once

#include <stdexcept>
#include <string>

namespace gem {

/// Base of every error thrown by the library. The CLI maps the subclasses
/// onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or image shapes violate a module contract.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input values are unusable (NaN pixels, non-binary data where binary is required).
class InputError : public Error {
public:
    using Error::Error;
};

/// Weight or checkpoint file does not match the model schema.
class LoadError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// More queries requested than feature locations available.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Non-finite costs, losses or gradients.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid algorithm parameters (e.g. t-SNE perplexity too large for the point count).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed or unknown configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset content problems: validation-split leakage, missing files, bad manifests.
class DataError : public Error {
public:
    using Error::Error;
};

class LeakageError : public DataError {
public:
    using DataError::DataError;
};

class BackendError : public Error {
public:
    using Error::Error;
};

}  // namespace gem
