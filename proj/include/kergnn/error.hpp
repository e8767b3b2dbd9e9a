#pragma once

#include <stdexcept>
#include <string>

namespace kergnn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or shape mismatch passed to a library call.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A required input file is missing or unreadable.
class LoadError : public Error {
public:
    using Error::Error;
};

/// Malformed input file contents (dataset files, graph files, checkpoints).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Hyperparameter configuration is inconsistent or out of range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Output could not be written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Optimization diverged (non-finite loss) or otherwise failed at runtime.
class TrainingError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ArgumentError(msg);
}

} // namespace detail
} // namespace kergnn
