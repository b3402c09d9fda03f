#pragma once

#include <stdexcept>

namespace cwa {

// Base class for every failure the library reports. The CLI maps any
// Error to exit code 1; usage problems are handled by the CLI layer.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor or matrix shapes do not agree.
struct DimensionError : Error {
    using Error::Error;
};

// A value is outside its valid range (nonpositive norm denominator,
// empty sample set, bad layer index, ...).
struct DomainError : Error {
    using Error::Error;
};

// A token id that the vocabulary does not contain.
struct VocabularyError : Error {
    using Error::Error;
};

// A sequence would exceed the model's maximum context length.
struct CapacityError : Error {
    using Error::Error;
};

// A model file with a bad magic or unsupported version.
struct FormatError : Error {
    using Error::Error;
};

// A model file whose payload is truncated or inconsistent.
struct CorruptionError : Error {
    using Error::Error;
};

// Call arguments that violate a cross-argument contract, e.g. sign and
// attribution lists of different lengths.
struct ProtocolError : Error {
    using Error::Error;
};

} // namespace cwa
