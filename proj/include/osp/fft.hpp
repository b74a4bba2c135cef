#pragma once

// Radix-2 complex FFT (forward unnormalized, inverse scaled by 1/N) plus a
// Bluestein fallback for arbitrary lengths. The spectral loss terms need
// exact length-L frequency grids, so power-of-two padding is not always an
// option there.

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "osp/error.hpp"

namespace osp::fft {

using cd = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline unsigned log2u(std::size_t n) {
    unsigned l = 0;
    while ((std::size_t{1} << l) < n) ++l;
    return l;
}

namespace detail {

struct Twiddles {
    std::vector<cd> w;  // w[k] = exp(-i 2 pi k / n), k < n/2
};

// Table entries are immutable once built; std::map node addresses are stable.
inline const Twiddles& twiddles(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<Twiddles>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        auto t = std::make_unique<Twiddles>();
        t->w.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
            t->w[k] = {std::cos(a), std::sin(a)};
        }
        slot = std::move(t);
    }
    return *slot;
}

}  // namespace detail

// In-place radix-2 Cooley-Tukey. Length must be a power of two.
inline void fft_inplace(std::vector<cd>& a, bool inverse = false) {
    const std::size_t n = a.size();
    require(is_pow2(n), "rda", "fft: length " + std::to_string(n) + " is not a power of two");
    if (n == 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto& tw = detail::twiddles(n).w;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                cd w = tw[k * stride];
                if (inverse) w = std::conj(w);
                const cd u = a[i + k];
                const cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
    if (inverse) {
        const double s = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= s;
    }
}

inline std::vector<cd> fft(std::vector<cd> v) {
    fft_inplace(v, false);
    return v;
}

inline std::vector<cd> ifft(std::vector<cd> v) {
    fft_inplace(v, true);
    return v;
}

// DFT of arbitrary length via Bluestein's chirp-z when n is not a power of
// two. Same convention as fft/ifft.
inline std::vector<cd> dft_any(const std::vector<cd>& x, bool inverse = false) {
    const std::size_t n = x.size();
    require(n >= 1, "loss", "dft_any: empty input");
    if (is_pow2(n)) {
        std::vector<cd> v = x;
        fft_inplace(v, inverse);
        return v;
    }
    if (inverse) {
        std::vector<cd> xc(n);
        for (std::size_t i = 0; i < n; ++i) xc[i] = std::conj(x[i]);
        std::vector<cd> y = dft_any(xc, false);
        const double s = 1.0 / static_cast<double>(n);
        for (auto& v : y) v = std::conj(v) * s;
        return y;
    }
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cd> w(n);  // w[k] = exp(-i pi k^2 / n)
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the argument small for long inputs.
        const std::size_t k2 = (k * k) % (2 * n);
        const double a = -kPi * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = {std::cos(a), std::sin(a)};
    }
    std::vector<cd> u(m, cd{0.0, 0.0});
    std::vector<cd> v(m, cd{0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) u[k] = x[k] * w[k];
    v[0] = std::conj(w[0]);
    for (std::size_t t = 1; t < n; ++t) {
        v[t] = std::conj(w[t]);
        v[m - t] = std::conj(w[t]);
    }
    fft_inplace(u, false);
    fft_inplace(v, false);
    for (std::size_t i = 0; i < m; ++i) u[i] *= v[i];
    fft_inplace(u, true);
    std::vector<cd> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = u[k] * w[k];
    return y;
}

// Real-input DFT, first floor(n/2)+1 bins.
inline std::vector<cd> rfft(const std::vector<double>& x) {
    std::vector<cd> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = cd{x[i], 0.0};
    std::vector<cd> full = dft_any(c, false);
    full.resize(x.size() / 2 + 1);
    return full;
}

// Normalized frequencies of rfft bins: k/n for k = 0..floor(n/2).
inline std::vector<double> rfftfreq(std::size_t n) {
    std::vector<double> f(n / 2 + 1);
    for (std::size_t k = 0; k < f.size(); ++k)
        f[k] = static_cast<double>(k) / static_cast<double>(n);
    return f;
}

}  // namespace osp::fft
