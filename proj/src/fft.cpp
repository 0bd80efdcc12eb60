#include "modalid/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

namespace modalid {
namespace {

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct BufferDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

// Planning is not thread-safe in FFTW; execution with the new-array interface is.
std::mutex plan_mutex;
std::map<std::size_t, Plan> plans;

fftw_plan plan_for(std::size_t n) {
    std::lock_guard lock(plan_mutex);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second.get();
    std::unique_ptr<double, BufferDeleter> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, BufferDeleter> out(fftw_alloc_complex(n / 2 + 1));
    Plan p(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(),
                                FFTW_ESTIMATE | FFTW_PRESERVE_INPUT));
    auto* raw = p.get();
    plans.emplace(n, std::move(p));
    return raw;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const fftw_plan plan = plan_for(n);
    std::unique_ptr<double, BufferDeleter> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, BufferDeleter> out(fftw_alloc_complex(n / 2 + 1));
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    std::vector<std::complex<double>> result(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) result[k] = {out.get()[k][0], out.get()[k][1]};
    return result;
}

}  // namespace modalid
