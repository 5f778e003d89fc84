#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mslink {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Passband carrier too close to the sample rate to be represented.
class AliasingError : public DomainError {
public:
    using DomainError::DomainError;
};

/// A formula hit a pole (circuit resonance, matched-denominator cancellation).
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Requested phase targets cannot be realised by the reflection curve.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Bit/symbol counts that do not fit the frame structure.
class FramingError : public Error {
public:
    using Error::Error;
};

class SyncNotFoundError : public Error {
public:
    using Error::Error;
};

class DegeneratePilotError : public Error {
public:
    using Error::Error;
};

class SingularChannelError : public Error {
public:
    using Error::Error;
};

class InterpolationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Stream header disagrees with the IQ data it describes.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Frame-level failure while decoding a multi-frame stream; earlier frames were
/// already written out.
class PartialOutputError : public Error {
public:
    PartialOutputError(std::size_t frame_index, const std::string& what)
        : Error(what), frame_index_(frame_index) {}

    std::size_t frame_index() const noexcept { return frame_index_; }

private:
    std::size_t frame_index_;
};

} // namespace mslink
