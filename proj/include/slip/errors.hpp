#pragma once

#include <stdexcept>
#include <string>

namespace slip {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct OverflowError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct RankError : Error {
    using Error::Error;
};
struct UnsafeSplitError : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    using Error::Error;
};
struct PlanShapeMismatch : Error {
    using Error::Error;
};
struct UnknownLayerError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct MaskExhaustedError : Error {
    using Error::Error;
};
struct TopologyMismatch : Error {
    using Error::Error;
};
struct MalformedFrame : Error {
    using Error::Error;
};
struct VersionMismatch : Error {
    using Error::Error;
};
struct Timeout : Error {
    using Error::Error;
};
struct ConnectionClosed : Error {
    using Error::Error;
};
struct RankDeficientError : Error {
    using Error::Error;
};
struct DegenerateError : Error {
    using Error::Error;
};
struct InsufficientSamples : Error {
    using Error::Error;
};

} // namespace slip
