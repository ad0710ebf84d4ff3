#pragma once

#include <stdexcept>
#include <string>

namespace ustm {

struct Error : std::runtime_error {
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

struct SingularMatrix : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};
struct InvalidParams : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct InvariantViolation : Error {
    using Error::Error;
};
struct StructureViolation : Error {
    using Error::Error;
};
struct ZeroDeterminant : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct OutOfRange : Error {
    using Error::Error;
};

} // namespace ustm
