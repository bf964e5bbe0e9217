#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace camtrap {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Non-finite data or a failed decomposition inside an iterative solver.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

// Wraps a failure inside one pipeline stage with the stage name and the
// frame/sample it was working on.
class StageError : public Error {
public:
    StageError(std::string stage, std::string context, const std::string& cause)
        : Error(stage + " [" + context + "]: " + cause), stage_(std::move(stage)), context_(std::move(context)) {}
    const std::string& stage() const noexcept { return stage_; }
    const std::string& context() const noexcept { return context_; }

private:
    std::string stage_;
    std::string context_;
};

}  // namespace camtrap
