#pragma once

#include <complex>
#include <span>
#include <vector>

namespace modalid {

/// Real-to-complex DFT, bins 0 .. n/2 (unnormalised). Thread-safe.
std::vector<std::complex<double>> rfft(std::span<const double> x);

}  // namespace modalid
