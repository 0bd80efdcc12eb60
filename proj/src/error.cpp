#include "modalid/error.hpp"

#include <utility>

namespace modalid {

RankDeficientError::RankDeficientError(std::string what, std::vector<double> singular_values,
                                       std::size_t rank)
    : Error(std::move(what)), singular_values_(std::move(singular_values)), rank_(rank) {}

IdentificationFailedError::IdentificationFailedError(std::string what,
                                                     std::vector<std::string> diagnostics)
    : Error(std::move(what)), diagnostics_(std::move(diagnostics)) {}

MetadataError::MetadataError(std::string what, std::vector<std::string> offenders)
    : Error(std::move(what)), offenders_(std::move(offenders)) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

}  // namespace modalid
