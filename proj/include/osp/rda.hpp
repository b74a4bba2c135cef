#pragma once

// Classical Range-Doppler processors: batched full-scene focusing and the
// linewise rolling-buffer variant. Stage order per pass: range FFT, azimuth
// FFT, x H_r, x H_rcmc, range IFFT, x H_a, azimuth IFFT.

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "osp/error.hpp"
#include "osp/fft.hpp"
#include "osp/sarcore.hpp"
#include "osp/simgen.hpp"

namespace osp::rda {

using fft::cd;

struct RdaFilters {
    std::size_t n_az = 0;  // azimuth grid (rows), power of two
    std::size_t n_r = 0;   // range grid (cols), power of two
    std::vector<cd> h_r;     // length n_r, range-frequency domain
    std::vector<cd> h_rcmc;  // n_az * n_r, 2-D frequency domain (identity by default)
    std::vector<cd> h_a;     // n_az * n_r, range-Doppler domain
};

// Time-centered chirp replica wrapped circularly into an n_r row: bin 0 is the
// chirp center, negative fast times wrap to the upper end.
inline std::vector<cd> chirp_replica(const RadarParams& p, std::size_t n_r) {
    const double fs = p.range_sample_rate;
    const double kr = p.chirp_bandwidth / p.chirp_duration;
    std::vector<cd> rep(n_r, cd{0.0, 0.0});
    for (std::size_t n = 0; n < n_r; ++n) {
        const auto signed_n = static_cast<long long>((n + n_r / 2) % n_r) -
                              static_cast<long long>(n_r / 2);
        const double t = static_cast<double>(signed_n) / fs;
        if (std::abs(t) <= p.chirp_duration / 2.0) {
            const double ph = fft::kPi * kr * t * t;
            rep[n] = cd{std::cos(ph), std::sin(ph)};
        }
    }
    return rep;
}

inline std::vector<cd> build_range_filter(const RadarParams& p, std::size_t n_r) {
    std::vector<cd> h = fft::fft(chirp_replica(p, n_r));
    for (auto& v : h) v = std::conj(v);
    return h;
}

// Azimuth matched filter with K_a(r) = 2 v^2 / (mu R(r)). The kernel is a
// time-limited matched replica, conj(s(-t)) = exp(+i pi K_a t^2) over half an
// aperture per side with a light Tukey edge taper, transformed onto the n_az
// Doppler grid. Finite support keeps a rolling window's center row identical
// to the batched result: both grids sample the same integer-lag kernel.
inline std::vector<cd> build_azimuth_filter(const RadarParams& p, std::size_t n_az,
                                            std::size_t n_r) {
    const auto half_support = static_cast<long long>(
        std::llround(simgen::aperture_half_length(p) / p.az_spacing));
    require(half_support * 2 + 1 <= static_cast<long long>(n_az), "rda",
            "azimuth grid shorter than the aperture kernel");
    std::vector<cd> h(n_az * n_r);
    std::vector<cd> g(n_az);
    const double taper_start = 0.75 * static_cast<double>(half_support);
    for (std::size_t r = 0; r < n_r; ++r) {
        const double range = p.r0 + static_cast<double>(r) * kSpeedOfLight /
                                        (2.0 * p.range_sample_rate);
        const double ka = 2.0 * p.platform_velocity * p.platform_velocity /
                          (p.wavelength * range);
        std::fill(g.begin(), g.end(), cd{0.0, 0.0});
        for (long long m = -half_support; m <= half_support; ++m) {
            const double t = static_cast<double>(m) / p.prf;
            const double ph = fft::kPi * ka * t * t;
            const double am = std::abs(static_cast<double>(m));
            const double win =
                (am <= taper_start || half_support == 0)
                    ? 1.0
                    : 0.5 * (1.0 + std::cos(fft::kPi * (am - taper_start) /
                                            (static_cast<double>(half_support) - taper_start)));
            const std::size_t idx =
                (m >= 0) ? static_cast<std::size_t>(m)
                         : n_az - static_cast<std::size_t>(-m);
            g[idx] = win * cd{std::cos(ph), std::sin(ph)};
        }
        fft::fft_inplace(g, false);
        for (std::size_t m = 0; m < n_az; ++m) h[m * n_r + r] = g[m];
    }
    return h;
}

inline RdaFilters build_filters(const RadarParams& p, std::size_t n_az, std::size_t n_r,
                                const std::vector<cd>* custom_rcmc = nullptr) {
    p.validate(n_r);
    require(fft::is_pow2(n_az) && fft::is_pow2(n_r), "rda",
            "build_filters: grid dims must be powers of two");
    RdaFilters f;
    f.n_az = n_az;
    f.n_r = n_r;
    f.h_r = build_range_filter(p, n_r);
    if (custom_rcmc) {
        require(custom_rcmc->size() == n_az * n_r, "rda", "build_filters: rcmc size mismatch");
        f.h_rcmc = *custom_rcmc;
    } else {
        f.h_rcmc.assign(n_az * n_r, cd{1.0, 0.0});
    }
    f.h_a = build_azimuth_filter(p, n_az, n_r);
    return f;
}

inline std::vector<cd> range_compress_row(std::span<const cd> row, const std::vector<cd>& h_r) {
    require(row.size() == h_r.size(), "rda", "range_compress_row: length mismatch");
    std::vector<cd> v(row.begin(), row.end());
    fft::fft_inplace(v, false);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= h_r[i];
    fft::fft_inplace(v, true);
    return v;
}

namespace detail {

inline void fft_rows(std::vector<cd>& grid, std::size_t rows, std::size_t cols, bool inverse) {
    std::vector<cd> tmp(cols);
    for (std::size_t k = 0; k < rows; ++k) {
        std::copy(grid.begin() + k * cols, grid.begin() + (k + 1) * cols, tmp.begin());
        fft::fft_inplace(tmp, inverse);
        std::copy(tmp.begin(), tmp.end(), grid.begin() + k * cols);
    }
}

inline void fft_cols(std::vector<cd>& grid, std::size_t rows, std::size_t cols, bool inverse) {
    std::vector<cd> tmp(rows);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t k = 0; k < rows; ++k) tmp[k] = grid[k * cols + c];
        fft::fft_inplace(tmp, inverse);
        for (std::size_t k = 0; k < rows; ++k) grid[k * cols + c] = tmp[k];
    }
}

// Steps 2..7 of the per-pass pipeline, applied to a range-FFT'd grid.
inline void focus_grid_after_range_fft(std::vector<cd>& grid, const RdaFilters& f) {
    const std::size_t na = f.n_az, nr = f.n_r;
    fft_cols(grid, na, nr, false);
    for (std::size_t k = 0; k < na; ++k)
        for (std::size_t c = 0; c < nr; ++c) grid[k * nr + c] *= f.h_r[c];
    for (std::size_t i = 0; i < na * nr; ++i) grid[i] *= f.h_rcmc[i];
    fft_rows(grid, na, nr, true);
    for (std::size_t i = 0; i < na * nr; ++i) grid[i] *= f.h_a[i];
    fft_cols(grid, na, nr, true);
}

}  // namespace detail

inline Raster focus_batched(const Raster& raw, const RdaFilters& f) {
    require(raw.rows == f.n_az && raw.cols == f.n_r, "rda",
            "focus_batched: raster dims do not match filters");
    require(raw.stage == Stage::RAW, "rda", "focus_batched: input stage must be raw");
    std::vector<cd> grid(raw.rows * raw.cols);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = cd{raw.data[i].real(), raw.data[i].imag()};
    detail::fft_rows(grid, raw.rows, raw.cols, false);
    detail::focus_grid_after_range_fft(grid, f);
    Raster out(raw.rows, raw.cols, Stage::AZ);
    out.params = raw.params;
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.data[i] = cfloat{static_cast<float>(grid[i].real()),
                             static_cast<float>(grid[i].imag())};
    return out;
}

// Rolling-buffer "look-ahead + look-back" length: 2 x aperture_cells, rounded
// up to even.
inline std::size_t default_buffer_len(const RadarParams& p) {
    std::size_t nb = 2 * simgen::aperture_cells(p);
    if (nb % 2 != 0) ++nb;
    require(nb >= 2, "rda", "buffer length must be >= 2");
    return nb;
}

struct FocusedRow {
    std::size_t index = 0;
    bool partial = false;  // emitted from an under-supported window edge
    std::vector<cfloat> data;
};

// Streaming linewise processor. Holds a ring of N_b range-FFT'd rows; the
// azimuth grid is zero-padded to the next power of two >= N_b. Steady-state
// output index = input index - N_b/2.
class LinewiseFocuser {
public:
    LinewiseFocuser(const RadarParams& p, std::size_t n_r, std::size_t n_b = 0)
        : n_r_(n_r), n_b_(n_b == 0 ? default_buffer_len(p) : n_b) {
        require(fft::is_pow2(n_r), "rda", "linewise: N_r must be a power of two");
        n_fft_ = fft::next_pow2(n_b_);
        filters_ = build_filters(p, n_fft_, n_r);
        ring_.assign(n_b_, std::vector<cd>(n_r_));
    }

    std::size_t buffer_len() const { return n_b_; }
    std::size_t delay_rows() const { return n_b_ / 2; }
    const RdaFilters& filters() const { return filters_; }

    std::vector<FocusedRow> push(std::size_t k, std::span<const cfloat> row) {
        require(k == next_input_, "rda",
                "linewise: out-of-order pulse index " + std::to_string(k) + " (expected " +
                    std::to_string(next_input_) + ")");
        require(row.size() == n_r_, "rda", "linewise: row length mismatch");
        ++next_input_;
        std::vector<cd> v(n_r_);
        for (std::size_t i = 0; i < n_r_; ++i) v[i] = cd{row[i].real(), row[i].imag()};
        fft::fft_inplace(v, false);  // cached per row
        ring_[k % n_b_] = std::move(v);
        if (fill_ < n_b_) ++fill_;

        std::vector<FocusedRow> out;
        if (fill_ < n_b_) return out;
        const std::vector<cd> grid = focus_window(k);
        if (!warm_) {
            // First full window: emit the leading under-supported rows too.
            warm_ = true;
            for (std::size_t pos = 0; pos + 1 < n_b_ / 2; ++pos)
                out.push_back(extract(grid, k, pos, true));
            out.push_back(extract(grid, k, n_b_ / 2 - 1, false));
        } else {
            out.push_back(extract(grid, k, n_b_ / 2 - 1, false));
        }
        next_output_ = out.back().index + 1;
        return out;
    }

    // Flushes the trailing rows from the final window, flagged partial.
    std::vector<FocusedRow> finish() {
        std::vector<FocusedRow> out;
        if (next_input_ == 0) return out;
        const std::size_t last = next_input_ - 1;
        if (fill_ < n_b_) {
            // Stream shorter than one buffer: zero-pad and emit everything.
            const std::vector<cd> grid = focus_window(last);
            for (std::size_t pos = 0; pos < fill_; ++pos)
                out.push_back(extract_short(grid, pos));
            return out;
        }
        const std::vector<cd> grid = focus_window(last);
        for (std::size_t pos = n_b_ / 2; pos < n_b_; ++pos)
            out.push_back(extract(grid, last, pos, true));
        return out;
    }

private:
    // Rebuild the zero-padded azimuth window ending at input row k and run
    // the full per-pulse pass over it.
    std::vector<cd> focus_window(std::size_t k) const {
        std::vector<cd> grid(n_fft_ * n_r_, cd{0.0, 0.0});
        const std::size_t count = std::min(fill_, n_b_);
        const std::size_t first = (fill_ < n_b_) ? 0 : k - n_b_ + 1;
        for (std::size_t pos = 0; pos < count; ++pos) {
            const std::vector<cd>& src = ring_[(first + pos) % n_b_];
            std::copy(src.begin(), src.end(), grid.begin() + pos * n_r_);
        }
        std::vector<cd> g = grid;
        detail::focus_grid_after_range_fft(g, filters_);
        return g;
    }

    FocusedRow extract(const std::vector<cd>& grid, std::size_t k, std::size_t pos,
                       bool partial) const {
        FocusedRow fr;
        fr.index = k - n_b_ + 1 + pos;
        fr.partial = partial;
        fr.data.resize(n_r_);
        for (std::size_t i = 0; i < n_r_; ++i)
            fr.data[i] = cfloat{static_cast<float>(grid[pos * n_r_ + i].real()),
                                static_cast<float>(grid[pos * n_r_ + i].imag())};
        return fr;
    }

    FocusedRow extract_short(const std::vector<cd>& grid, std::size_t pos) const {
        FocusedRow fr;
        fr.index = pos;
        fr.partial = true;
        fr.data.resize(n_r_);
        for (std::size_t i = 0; i < n_r_; ++i)
            fr.data[i] = cfloat{static_cast<float>(grid[pos * n_r_ + i].real()),
                                static_cast<float>(grid[pos * n_r_ + i].imag())};
        return fr;
    }

    std::size_t n_r_;
    std::size_t n_b_;
    std::size_t n_fft_ = 0;
    RdaFilters filters_;
    std::vector<std::vector<cd>> ring_;
    std::size_t fill_ = 0;
    std::size_t next_input_ = 0;
    std::size_t next_output_ = 0;
    bool warm_ = false;
};

}  // namespace osp::rda
