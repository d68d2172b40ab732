#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "utir/raster.hpp"

namespace utir::fft {

// Thin FFTW wrapper. Plans are created once per (height, width, direction)
// with FFTW_ESTIMATE (deterministic plan choice, no input clobbering) and
// FFTW_UNALIGNED so they can be re-executed on any caller buffer.
namespace detail {

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int h, int w, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto key = std::make_tuple(h, w, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<cdouble> a(static_cast<size_t>(w) * h), b(a.size());
        fftw_plan p = fftw_plan_dft_2d(h, w,
                                       reinterpret_cast<fftw_complex*>(a.data()),
                                       reinterpret_cast<fftw_complex*>(b.data()),
                                       sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

private:
    PlanCache() = default;
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

// Out-of-place 2-D transform; in and out must not alias. Forward is
// unnormalized, inverse carries the 1/(w*h) factor so inverse(forward(x)) == x.
inline void transform(int width, int height, const cdouble* in, cdouble* out, bool inverse) {
    fftw_plan p = detail::PlanCache::instance().get(height, width, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
    fftw_execute_dft(p,
                     reinterpret_cast<fftw_complex*>(const_cast<cdouble*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
    if (inverse) {
        const double s = 1.0 / (static_cast<double>(width) * height);
        const size_t n = static_cast<size_t>(width) * height;
        for (size_t i = 0; i < n; ++i) out[i] *= s;
    }
}

inline ComplexField fft2(const ComplexField& f) {
    ComplexField out(f.width, f.height, f.pitch);
    transform(f.width, f.height, f.v.data(), out.v.data(), false);
    return out;
}

inline ComplexField ifft2(const ComplexField& f) {
    ComplexField out(f.width, f.height, f.pitch);
    transform(f.width, f.height, f.v.data(), out.v.data(), true);
    return out;
}

// Signed FFT frequency index: j -> j for j < (n+1)/2, else j - n.
inline int freq_index(int j, int n) { return j < (n + 1) / 2 ? j : j - n; }

}  // namespace utir::fft
