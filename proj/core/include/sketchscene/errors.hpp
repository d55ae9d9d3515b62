#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sketchscene {

// Root of every error the core library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct RangeError : Error {
    using Error::Error;
};
struct MaskError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct NotFoundError : Error {
    using Error::Error;
};

struct NumericError : Error {
    NumericError(const std::string& what, int step = -1) : Error(what), step(step) {}
    int step;  // inference level at which the value went non-finite, -1 if n/a
};

// Malformed scene / metadata document.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), byte_offset(byte_offset) {}
    std::size_t byte_offset;
};

struct VersionError : Error {
    using Error::Error;
};

// Identity token in a prompt without a bound embedding.
struct BindingError : Error {
    using Error::Error;
};
struct TokenizationError : Error {
    using Error::Error;
};
struct CapabilityError : Error {
    using Error::Error;
};

// Adapter failures.
struct ConnectivityError : Error {
    using Error::Error;
};
struct ContractViolation : Error {
    using Error::Error;
};
struct EmptyMaskError : Error {
    using Error::Error;
};
struct ReplayMissError : Error {
    using Error::Error;
};

struct ObjectGenerationError : Error {
    ObjectGenerationError(const std::string& object_id, int attempts)
        : Error("object generation failed for '" + object_id + "' after " + std::to_string(attempts) +
                " attempt(s): segmentation mask empty"),
          object_id(object_id),
          attempts(attempts) {}
    std::string object_id;
    int attempts;
};

struct PlacementError : Error {
    using Error::Error;
};

struct CompositionError : Error {
    CompositionError(const std::string& what, std::string object_id) : Error(what), object_id(std::move(object_id)) {}
    std::string object_id;
};

}  // namespace sketchscene
