#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "modalid/time_series.hpp"

namespace modalid {

/// One sensor location: acceleration plus the optional hammer force channel.
struct Record {
    TimeSeries accel;
    std::optional<TimeSeries> force;
};

/// Parses `time_s, force_n, accel` (force optional, header required). The sample rate comes
/// from the first two stamps unless overridden; every stamp must sit on the uniform grid
/// within 1e-9 s. Throws ParseError carrying the offending line number.
Record read_record_csv(std::istream& in, std::optional<double> sample_rate = std::nullopt);
Record read_record_csv(const std::string& path, std::optional<double> sample_rate = std::nullopt);

/// Time stamps in fixed point with 9 decimals, channel values with 9 significant digits.
void write_record_csv(std::ostream& out, const Record& rec);
void write_record_csv(const std::string& path, const Record& rec);

/// printf-style "%.<digits>g".
std::string format_sig(double v, int digits = 9);

}  // namespace modalid
