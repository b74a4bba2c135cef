// Scratch probe (not part of the suite): checks point-target focusing and the
// azimuth-filter sign empirically.
#include <cstdio>
#include <cmath>
#include "osp/rda.hpp"
#include "osp/simgen.hpp"

using namespace osp;

static RadarParams desk_params() {
    RadarParams p;
    p.prf = 160.0;
    p.wavelength = 0.03;
    p.antenna_length = 12.0;
    p.platform_velocity = 250.0;
    p.r0 = 30000.0;
    p.range_sample_rate = 100e6;
    p.chirp_bandwidth = 50e6;
    p.chirp_duration = 2e-6;
    p.az_spacing = p.platform_velocity / p.prf;
    return p;
}

int main() {
    RadarParams p = desk_params();
    std::printf("aperture_cells = %zu (half beam %.2f m)\n", simgen::aperture_cells(p),
                simgen::aperture_half_length(p));

    simgen::SceneSpec spec;
    spec.params = p;
    spec.n_pulses = 256;
    spec.n_range_bins = 256;
    simgen::PointTarget t;
    t.az_position = 128 * p.az_spacing;   // row 128
    t.range_offset = 120 * kSpeedOfLight / (2 * p.range_sample_rate);  // bin 120
    spec.targets = {t};
    auto bin_m = kSpeedOfLight / (2 * p.range_sample_rate);
    for (int i = 1; i < 5; ++i) {
        simgen::PointTarget ti;
        ti.az_position = (40 + 40 * i) * p.az_spacing;
        ti.range_offset = (30 + 45 * i) * bin_m;
        ti.amplitude = 0.5 + 0.3 * i;
        spec.targets.push_back(ti);
    }
    spec.clutter_mean_power = 1.0;
    spec.seed = 7;

    Raster raw = simgen::synth_raw(spec);
    rda::RdaFilters f = rda::build_filters(p, 256, 256);
    Raster az = rda::focus_batched(raw, f);

    double best = -1;
    std::size_t bk = 0, bc = 0;
    for (std::size_t k = 0; k < az.rows; ++k)
        for (std::size_t c = 0; c < az.cols; ++c) {
            const double m = std::abs(std::complex<double>(az.at(k, c)));
            if (m > best) { best = m; bk = k; bc = c; }
        }
    std::printf("peak at (k=%zu, r=%zu) mag %.3f  -- truth (128, 120)\n", bk, bc, best);

    // Azimuth profile through the peak: mainlobe width + PSLR.
    std::vector<double> prof(az.rows);
    for (std::size_t k = 0; k < az.rows; ++k)
        prof[k] = std::abs(std::complex<double>(az.at(k, bc)));
    double side = 0;
    for (std::size_t k = 0; k < az.rows; ++k)
        if (std::llabs((long long)k - (long long)bk) > 8) side = std::max(side, prof[k]);
    std::printf("azimuth PSLR = %.2f dB\n", 20 * std::log10(best / side));

    // Half-power (-3 dB on power) crossings around the peak.
    const double hp = best / std::sqrt(2.0);
    double lo = bk, hi = bk;
    for (double k = bk; k > 0; k -= 0.0625) {
        std::size_t i = (std::size_t)k;
        double v = prof[i] + (prof[i + 1] - prof[i]) * (k - i);
        if (v < hp) { lo = k; break; }
    }
    for (double k = bk; k + 1 < az.rows; k += 0.0625) {
        std::size_t i = (std::size_t)k;
        double v = prof[i] + (prof[i + 1] - prof[i]) * (k - i);
        if (v < hp) { hi = k; break; }
    }
    std::printf("azimuth 3dB width = %.2f bins = %.3f m (theory L_ant/2 = %.3f m)\n",
                hi - lo, (hi - lo) * p.az_spacing, p.antenna_length / 2);

    // Range profile PSLR.
    std::vector<double> rprof(az.cols);
    for (std::size_t c = 0; c < az.cols; ++c)
        rprof[c] = std::abs(std::complex<double>(az.at(bk, c)));
    double rside = 0;
    for (std::size_t c = 0; c < az.cols; ++c)
        if (std::llabs((long long)c - (long long)bc) > 6) rside = std::max(rside, rprof[c]);
    std::printf("range PSLR = %.2f dB\n", 20 * std::log10(rprof[bc] / rside));

    // Linewise agreement with batched.
    rda::LinewiseFocuser lw(p, 256);
    std::printf("N_b = %zu, delay = %zu\n", lw.buffer_len(), lw.delay_rows());
    std::vector<rda::FocusedRow> rowsout;
    for (std::size_t k = 0; k < raw.rows; ++k) {
        auto got = lw.push(k, raw.row(k));
        for (auto& g : got) rowsout.push_back(std::move(g));
    }
    for (auto& g : lw.finish()) rowsout.push_back(std::move(g));
    std::printf("emitted %zu rows\n", rowsout.size());
    double worst = 0;
    std::size_t worst_k = 0;
    const std::size_t edge = lw.buffer_len() / 2;
    for (const auto& fr : rowsout) {
        if (fr.index < edge || fr.index >= raw.rows - edge) continue;
        double num = 0, den = 0;
        for (std::size_t c = 0; c < az.cols; ++c) {
            const std::complex<double> a(fr.data[c]);
            const std::complex<double> b(az.at(fr.index, c));
            num += std::norm(a - b);
            den += std::norm(b);
        }
        const double rel = std::sqrt(num / (den + 1e-300));
        if (rel > worst) { worst = rel; worst_k = fr.index; }
    }
    std::printf("worst interior relative L2 (linewise vs batched) = %.4f at row %zu\n",
                worst, worst_k);
    for (std::size_t idx : {worst_k, std::size_t(128), std::size_t(126)}) {
        const auto& fr = rowsout[idx];
        double num = 0, den = 0, mx = 0;
        for (std::size_t c = 0; c < az.cols; ++c) {
            const std::complex<double> a(fr.data[c]);
            const std::complex<double> b(az.at(fr.index, c));
            num += std::norm(a - b);
            den += std::norm(b);
            mx = std::max(mx, std::abs(b));
        }
        std::printf("row %zu: |diff|=%.4g |batched|=%.4g maxabs(batched)=%.4g rel=%.4g\n",
                    fr.index, std::sqrt(num), std::sqrt(den), mx,
                    std::sqrt(num) / std::sqrt(den));
    }
    return 0;
}
