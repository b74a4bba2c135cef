#pragma once

// Synthetic raw phase-history generation: point targets under a linear
// stripmap aperture plus exponential-intensity clutter. Row generation is
// keyed by (seed, pulse index) so parallel producers give identical output.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "osp/error.hpp"
#include "osp/sarcore.hpp"

namespace osp::simgen {

struct PointTarget {
    double az_position = 0.0;   // m along track
    double range_offset = 0.0;  // m beyond r0
    double amplitude = 1.0;
    double phase = 0.0;  // rad
};

struct SceneSpec {
    RadarParams params;
    std::size_t n_pulses = 0;
    std::size_t n_range_bins = 0;
    std::vector<PointTarget> targets;
    double clutter_mean_power = 0.0;  // 0 disables clutter
    std::uint64_t seed = 0;

    void validate() const {
        params.validate(n_range_bins);
        auto pow2 = [](std::size_t n) { return n != 0 && (n & (n - 1)) == 0; };
        require(pow2(n_pulses) && pow2(n_range_bins), "simgen",
                "scene dims must be powers of two");
        require(clutter_mean_power >= 0.0, "simgen", "clutter_mean_power must be >= 0");
    }
};

// One-sided synthetic-aperture extent in azimuth cells:
// round(R_o * mu / (L_ant * dx_az)).
inline std::size_t aperture_cells(const RadarParams& p) {
    p.validate();
    const double cells = p.r0 * p.wavelength / (p.antenna_length * p.az_spacing);
    return static_cast<std::size_t>(std::llround(cells));
}

// Hard rect beam window: |x_platform - x_target| <= R_o * mu / (2 L_ant).
inline double aperture_half_length(const RadarParams& p) {
    return p.r0 * p.wavelength / (2.0 * p.antenna_length);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Counter-based per-row stream: state derived from (seed, row).
struct RowRng {
    std::uint64_t s;
    RowRng(std::uint64_t seed, std::uint64_t row) {
        std::uint64_t mix = seed;
        splitmix64(mix);
        s = mix ^ (0xD1B54A32D192ED03ull * (row + 1));
    }
    double unit() {  // [0, 1)
        return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    }
    // Circular complex Gaussian with E|z|^2 = mean_power; |z|^2 ~ Exp(mean_power).
    cdouble complex_gaussian(double mean_power) {
        const double u1 = 1.0 - unit();  // (0, 1]
        const double u2 = unit();
        const double r = std::sqrt(-mean_power * std::log(u1));
        return {r * std::cos(2.0 * fft_pi() * u2), r * std::sin(2.0 * fft_pi() * u2)};
    }
    static constexpr double fft_pi() { return 3.141592653589793238462643383279502884; }
};

}  // namespace detail

inline Raster synth_clutter(std::size_t rows, std::size_t cols, double mean_power,
                            std::uint64_t seed) {
    require(mean_power > 0.0, "simgen", "synth_clutter: mean_power must be > 0");
    require(rows >= 1 && cols >= 1, "simgen", "synth_clutter: empty dims");
    Raster r(rows, cols, Stage::RAW);
    for (std::size_t k = 0; k < rows; ++k) {
        detail::RowRng rng(seed, k);
        for (std::size_t c = 0; c < cols; ++c) {
            const cdouble z = rng.complex_gaussian(mean_power);
            r.at(k, c) = cfloat{static_cast<float>(z.real()), static_cast<float>(z.imag())};
        }
    }
    return r;
}

inline Raster synth_raw(const SceneSpec& spec) {
    spec.validate();
    const RadarParams& p = spec.params;
    const double t_near = 2.0 * p.r0 / kSpeedOfLight;  // fast-time origin: bin 0 <-> r0
    const double fs = p.range_sample_rate;
    const double kr = p.chirp_bandwidth / p.chirp_duration;
    const double half_beam = aperture_half_length(p);
    const double tp_half = p.chirp_duration / 2.0;

    for (std::size_t i = 0; i < spec.targets.size(); ++i) {
        const double rt = p.r0 + spec.targets[i].range_offset;
        const double bin = (2.0 * rt / kSpeedOfLight - t_near) * fs;
        require(bin >= 0.0 && bin < static_cast<double>(spec.n_range_bins), "simgen",
                "target " + std::to_string(i) + " outside swath (range bin " +
                    std::to_string(bin) + ")");
    }

    Raster out(spec.n_pulses, spec.n_range_bins, Stage::RAW);
    std::vector<cdouble> acc(spec.n_range_bins);
    for (std::size_t k = 0; k < spec.n_pulses; ++k) {
        std::fill(acc.begin(), acc.end(), cdouble{0.0, 0.0});
        const double x_plat = p.platform_velocity * static_cast<double>(k) / p.prf;
        for (const PointTarget& t : spec.targets) {
            const double dx = x_plat - t.az_position;
            if (std::abs(dx) > half_beam) continue;
            const double rt = p.r0 + t.range_offset;
            const double ri = std::sqrt(rt * rt + dx * dx);
            const double tau = 2.0 * ri / kSpeedOfLight;
            const double center = (tau - t_near) * fs;
            const auto n_lo =
                static_cast<long long>(std::ceil(center - tp_half * fs));
            const auto n_hi =
                static_cast<long long>(std::floor(center + tp_half * fs));
            const double az_phase = -4.0 * detail::RowRng::fft_pi() * ri / p.wavelength + t.phase;
            for (long long n = std::max(n_lo, 0ll);
                 n <= std::min(n_hi, static_cast<long long>(spec.n_range_bins) - 1); ++n) {
                const double u = (static_cast<double>(n) - center) / fs;
                const double ph = detail::RowRng::fft_pi() * kr * u * u + az_phase;
                acc[static_cast<std::size_t>(n)] +=
                    t.amplitude * cdouble{std::cos(ph), std::sin(ph)};
            }
        }
        if (spec.clutter_mean_power > 0.0) {
            detail::RowRng rng(spec.seed, k);
            for (std::size_t c = 0; c < spec.n_range_bins; ++c)
                acc[c] += rng.complex_gaussian(spec.clutter_mean_power);
        }
        for (std::size_t c = 0; c < spec.n_range_bins; ++c)
            out.at(k, c) =
                cfloat{static_cast<float>(acc[c].real()), static_cast<float>(acc[c].imag())};
    }
    return out;
}

}  // namespace osp::simgen
