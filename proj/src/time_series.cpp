#include "modalid/time_series.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "modalid/error.hpp"

namespace modalid {

TimeSeries::TimeSeries(std::vector<double> s, double rate, std::string lbl, double start)
    : samples(std::move(s)), sample_rate(rate), label(std::move(lbl)), t0(start) {}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > samples.size()) {
        throw InvalidParameterError("slice [" + std::to_string(begin) + ", " +
                                    std::to_string(end) + ") outside series of length " +
                                    std::to_string(samples.size()));
    }
    return TimeSeries(std::vector<double>(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                          samples.begin() + static_cast<std::ptrdiff_t>(end)),
                      sample_rate, label, time_at(begin));
}

void TimeSeries::validate() const {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        throw InvalidParameterError("sample rate must be positive, got " +
                                    std::to_string(sample_rate));
    }
    if (samples.empty()) {
        throw InvalidParameterError("time series '" + label + "' is empty");
    }
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double rms(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace modalid
