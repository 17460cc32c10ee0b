#pragma once
// Error types thrown across the toolkit. Every failure mode callers are
// expected to handle gets its own type so tests can assert on it.

#include <stdexcept>
#include <string>

namespace fsde {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidParams : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct NonConvergent : Error {
    using Error::Error;
};
struct SingularArgument : Error {
    using Error::Error;
};
struct TailTooLarge : Error {
    using Error::Error;
};
struct NotGridPoint : Error {
    using Error::Error;
};
struct UnknownModel : Error {
    using Error::Error;
};
struct CapExceeded : Error {
    using Error::Error;
};
struct DegenerateInput : Error {
    using Error::Error;
};
struct TooFewSamples : Error {
    using Error::Error;
};
struct ConfigInvalid : Error {
    using Error::Error;
};
struct NumericFailure : Error {
    using Error::Error;
};
struct NonFinite : Error {
    using Error::Error;
};
struct CholeskyFailure : Error {
    using Error::Error;
};

}  // namespace fsde
