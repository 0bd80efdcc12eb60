#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace modalid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidFilterError : public Error {
public:
    using Error::Error;
};

class TooShortError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

class DegenerateCoherenceError : public Error {
public:
    using Error::Error;
};

/// Requested realization order exceeds the numerical rank of H0.
class RankDeficientError : public Error {
public:
    RankDeficientError(std::string what, std::vector<double> singular_values, std::size_t rank);

    const std::vector<double>& singular_values() const noexcept { return singular_values_; }
    std::size_t rank() const noexcept { return rank_; }

private:
    std::vector<double> singular_values_;
    std::size_t rank_;
};

class SingularModeError : public Error {
public:
    using Error::Error;
};

class IdentificationFailedError : public Error {
public:
    IdentificationFailedError(std::string what, std::vector<std::string> diagnostics = {});

    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class UnobservableModelError : public Error {
public:
    using Error::Error;
};

class UndefinedScoreError : public Error {
public:
    using Error::Error;
};

class MetadataError : public Error {
public:
    MetadataError(std::string what, std::vector<std::string> offenders);

    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    std::vector<std::string> offenders_;
};

/// Malformed input file; line is 1-based, 0 when not line-specific.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace modalid
