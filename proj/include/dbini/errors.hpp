#pragma once

#include <stdexcept>
#include <string>

namespace dbini {

// Base of every recoverable failure raised by the library.  CLI maps these to
// exit code 1; argument/usage problems are handled before any of these fire.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

struct EmptyDomain : Error {
    explicit EmptyDomain(const std::string& msg) : Error(msg) {}
};

struct DegenerateNormal : Error {
    explicit DegenerateNormal(const std::string& msg) : Error(msg) {}
};

struct GaugeDeficient : Error {
    explicit GaugeDeficient(const std::string& msg) : Error(msg) {}
};

struct NotSpd : Error {
    explicit NotSpd(const std::string& msg) : Error(msg) {}
};

struct NumericalBreakdown : Error {
    explicit NumericalBreakdown(const std::string& msg) : Error(msg) {}
};

struct SceneOutOfBounds : Error {
    explicit SceneOutOfBounds(const std::string& msg) : Error(msg) {}
};

struct OracleTooLarge : Error {
    explicit OracleTooLarge(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace dbini
