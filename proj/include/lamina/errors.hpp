#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lamina {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Face indices out of range, repeated vertices, inconsistent orientation, non-manifold edges.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// A face whose area fell below the configured threshold.
class DegenerateFaceError : public Error {
public:
    DegenerateFaceError(std::size_t face, double area, int step = -1)
        : Error(message(face, area, step)), face_(face), step_(step) {}
    std::size_t face() const { return face_; }
    int step() const { return step_; }

private:
    static std::string message(std::size_t face, double area, int step) {
        std::string m = "degenerate face " + std::to_string(face) + " (area " + std::to_string(area) + ")";
        if (step >= 0) m += " at time step " + std::to_string(step);
        return m;
    }
    std::size_t face_;
    int step_;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, stalled integrations, failed solves.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace lamina
