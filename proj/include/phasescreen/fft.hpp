#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <span>
#include <tuple>

#include "phasescreen/grid.hpp"

namespace phasescreen {

enum class FftDirection : int { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per shape with FFTW_ESTIMATE so that the chosen
// algorithm (and hence every output bit) does not depend on timing.
class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    fftw_plan plan(int rank, std::size_t n, FftDirection dir) {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto key = std::make_tuple(rank, n, static_cast<int>(dir));
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        const std::size_t total = rank == 1 ? n : n * n;
        auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan p = rank == 1 ? fftw_plan_dft_1d(static_cast<int>(n), buf, buf, static_cast<int>(dir), flags)
                                : fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf,
                                                   static_cast<int>(dir), flags);
        fftw_free(buf);
        if (p == nullptr) throw NumericalError("FFTW failed to create a plan");
        plans_.emplace(key, p);
        return p;
    }

    FftPlanCache(const FftPlanCache&) = delete;
    FftPlanCache& operator=(const FftPlanCache&) = delete;

private:
    FftPlanCache() = default;
    ~FftPlanCache() {
        for (auto& [key, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mutex_;
    std::map<std::tuple<int, std::size_t, int>, fftw_plan> plans_;
};

inline void execute_in_place(fftw_plan p, std::span<Complex> data) {
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, ptr, ptr);
}

/// (-1)^(l_1 + ... + l_d) for a flat spectral index; N is even so l and k share parity.
inline double alternating_sign(const GridSpec& g, std::size_t flat) {
    const std::size_t parity = g.dim == 1 ? flat : (flat / g.points + flat % g.points);
    return (parity & 1U) ? -1.0 : 1.0;
}

}  // namespace detail

/// Unnormalized in-place DFT over the grid shape: sum_j f_j exp(-+2 pi i j k / N).
inline void fft_in_place(const GridSpec& g, std::span<Complex> data, FftDirection dir) {
    detail::require(data.size() == g.size(), "fft: buffer does not match grid");
    detail::execute_in_place(detail::FftPlanCache::instance().plan(g.dim, g.points, dir), data);
}

/// Unnormalized in-place 1D DFT of arbitrary length.
inline void fft_1d_in_place(std::span<Complex> data, FftDirection dir) {
    detail::execute_in_place(detail::FftPlanCache::instance().plan(1, data.size(), dir), data);
}

/// f_l = L^-d * integral exp(-i dk l.x) f(x) dx, evaluated by the grid sum.
inline SpectralField forward_transform(const ComplexField& f) {
    SpectralField out(f.grid);
    out.values = f.values;
    fft_in_place(f.grid, out.values, FftDirection::forward);
    const double scale = 1.0 / static_cast<double>(f.grid.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= scale * detail::alternating_sign(f.grid, k);
    return out;
}

/// f(x_j) = sum_l exp(i dk l.x_j) f_l.
inline ComplexField inverse_transform(const SpectralField& coeffs) {
    ComplexField out(coeffs.grid);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = coeffs[k] * detail::alternating_sign(coeffs.grid, k);
    fft_in_place(coeffs.grid, out.values, FftDirection::backward);
    return out;
}

}  // namespace phasescreen
