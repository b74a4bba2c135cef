#pragma once

// Streaming CA-CFAR vessel detection and threshold flood segmentation on
// focused imagery. The CFAR window follows the separable column-sum + 1-D
// box-filter scheme with reflect padding on both axes; the streaming pass and
// the offline whole-image pass share the per-row kernel so their outputs are
// bit-identical.

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "osp/error.hpp"
#include "osp/sarcore.hpp"

namespace osp::downstream {

struct CfarConfig {
    int guard_half = 10;   // G
    int train_half = 28;   // T
    double p_fa = 1e-6;
    int min_component = 3;

    int window_half() const { return guard_half + train_half; }
    int outer_side() const { return 2 * window_half() + 1; }
    int inner_side() const { return 2 * guard_half + 1; }
    std::size_t n_train() const {
        return static_cast<std::size_t>(outer_side()) * outer_side() -
               static_cast<std::size_t>(inner_side()) * inner_side();
    }
    void validate() const {
        require(guard_half >= 0 && train_half >= 1, "downstream",
                "cfar: need G >= 0 and T >= 1");
        require(p_fa > 0.0 && p_fa < 1.0, "downstream", "cfar: P_fa must be in (0, 1)");
    }
};

// alpha = N (P_fa^(-1/N) - 1): per-cell false-alarm multiplier under
// exponential clutter with the training-cell-mean noise estimate.
inline double cfar_alpha(std::size_t n_train, double p_fa) {
    require(n_train >= 1, "downstream", "cfar_alpha: n_train must be >= 1");
    require(p_fa > 0.0 && p_fa < 1.0, "downstream", "cfar_alpha: P_fa must be in (0, 1)");
    const double n = static_cast<double>(n_train);
    return n * (std::exp(-std::log(p_fa) / n) - 1.0);
}

struct Mask {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> m;

    Mask() = default;
    Mask(std::size_t r, std::size_t c) : rows(r), cols(c), m(r * c, 0) {}
    std::uint8_t& at(std::size_t k, std::size_t r) { return m[k * cols + r]; }
    std::uint8_t at(std::size_t k, std::size_t r) const { return m[k * cols + r]; }
};

struct Detection {
    std::size_t row = 0, col = 0;
    double intensity = 0;
    double threshold = 0;
};

struct CfarRow {
    std::size_t index = 0;
    std::vector<std::uint8_t> mask;
    std::vector<Detection> hits;
};

namespace detail {

// Reflect with edge duplication: (... c b a | a b c ... | z y x).
inline std::size_t reflect(long long i, std::size_t n) {
    const auto nn = static_cast<long long>(n);
    require(nn >= 1, "downstream", "reflect: empty axis");
    while (i < 0 || i >= nn) {
        if (i < 0) i = -i - 1;
        if (i >= nn) i = 2 * nn - 1 - i;
    }
    return static_cast<std::size_t>(i);
}

// Shared per-row CFAR kernel. `row_at(i)` returns the intensity row with
// absolute azimuth index i in [0, n_rows); reflection happens here. Column
// sums accumulate in ascending row order so every caller produces identical
// floating-point results.
inline CfarRow cfar_emit_row(const std::function<const double*(std::size_t)>& row_at,
                             std::size_t cut, std::size_t n_rows, std::size_t n_r,
                             const CfarConfig& cfg, double alpha) {
    const int wh = cfg.window_half();
    const int gh = cfg.guard_half;
    std::vector<double> outer_col(n_r, 0.0), inner_col(n_r, 0.0);
    for (int d = -wh; d <= wh; ++d) {
        const double* src = row_at(reflect(static_cast<long long>(cut) + d, n_rows));
        const bool inner = (d >= -gh && d <= gh);
        for (std::size_t j = 0; j < n_r; ++j) {
            outer_col[j] += src[j];
            if (inner) inner_col[j] += src[j];
        }
    }
    CfarRow out;
    out.index = cut;
    out.mask.assign(n_r, 0);
    const double* cut_row = row_at(cut);
    const double inv_n = 1.0 / static_cast<double>(cfg.n_train());
    for (std::size_t j = 0; j < n_r; ++j) {
        double outer2 = 0.0, inner2 = 0.0;
        for (int d = -wh; d <= wh; ++d)
            outer2 += outer_col[reflect(static_cast<long long>(j) + d, n_r)];
        for (int d = -gh; d <= gh; ++d)
            inner2 += inner_col[reflect(static_cast<long long>(j) + d, n_r)];
        const double train_sum = outer2 - inner2;
        const double thresh = alpha * train_sum * inv_n;
        if (cut_row[j] > thresh) {
            out.mask[j] = 1;
            out.hits.push_back(Detection{cut, j, cut_row[j], thresh});
        }
    }
    return out;
}

}  // namespace detail

// Streaming CA-CFAR over |z|^2 rows. Decisions for row k are emitted once row
// k + G + T has been ingested; azimuth memory is bounded by 2(G+T)+1 rows.
class CfarStream {
public:
    CfarStream(const CfarConfig& cfg, std::size_t n_r) : cfg_(cfg), n_r_(n_r) {
        cfg.validate();
        require(n_r >= 1, "downstream", "cfar: empty rows");
        alpha_ = cfar_alpha(cfg.n_train(), cfg.p_fa);
        window_rows_ = static_cast<std::size_t>(cfg.outer_side());
        ring_.assign(window_rows_, std::vector<double>(n_r_, 0.0));
    }

    double alpha() const { return alpha_; }
    std::size_t latency_rows() const { return static_cast<std::size_t>(cfg_.window_half()); }
    std::size_t memory_rows() const { return window_rows_; }

    std::vector<CfarRow> push(std::size_t k, std::span<const cfloat> row) {
        require(k == next_in_, "downstream",
                "cfar: out-of-order row " + std::to_string(k) + " (expected " +
                    std::to_string(next_in_) + ")");
        require(row.size() == n_r_, "downstream", "cfar: row length mismatch");
        std::vector<double>& slot = ring_[k % window_rows_];
        for (std::size_t j = 0; j < n_r_; ++j) {
            const double re = row[j].real(), im = row[j].imag();
            slot[j] = re * re + im * im;
        }
        ++next_in_;
        std::vector<CfarRow> out;
        if (next_in_ > latency_rows())
            out.push_back(emit(next_in_ - 1 - latency_rows(), next_in_));
        return out;
    }

    std::vector<CfarRow> finish() {
        std::vector<CfarRow> out;
        if (next_in_ == 0) return out;
        const std::size_t start =
            (next_in_ > latency_rows()) ? next_in_ - latency_rows() : 0;
        for (std::size_t c = start; c < next_in_; ++c) out.push_back(emit(c, next_in_));
        return out;
    }

private:
    CfarRow emit(std::size_t cut, std::size_t n_rows) const {
        auto row_at = [this](std::size_t i) -> const double* {
            return ring_[i % window_rows_].data();
        };
        return detail::cfar_emit_row(row_at, cut, n_rows, n_r_, cfg_, alpha_);
    }

    CfarConfig cfg_;
    std::size_t n_r_;
    double alpha_ = 0;
    std::size_t window_rows_ = 0;
    std::vector<std::vector<double>> ring_;
    std::size_t next_in_ = 0;
};

// Whole-image CA-CFAR with the identical padding and per-row kernel.
inline std::pair<Mask, std::vector<Detection>> cfar_offline(const Raster& img,
                                                            const CfarConfig& cfg) {
    cfg.validate();
    const double alpha = cfar_alpha(cfg.n_train(), cfg.p_fa);
    std::vector<std::vector<double>> intensity(img.rows, std::vector<double>(img.cols));
    for (std::size_t k = 0; k < img.rows; ++k)
        for (std::size_t j = 0; j < img.cols; ++j) {
            const double re = img.at(k, j).real(), im = img.at(k, j).imag();
            intensity[k][j] = re * re + im * im;
        }
    auto row_at = [&intensity](std::size_t i) -> const double* { return intensity[i].data(); };
    Mask mask(img.rows, img.cols);
    std::vector<Detection> hits;
    for (std::size_t c = 0; c < img.rows; ++c) {
        CfarRow r = detail::cfar_emit_row(row_at, c, img.rows, img.cols, cfg, alpha);
        std::copy(r.mask.begin(), r.mask.end(), mask.m.begin() + c * img.cols);
        hits.insert(hits.end(), r.hits.begin(), r.hits.end());
    }
    return {std::move(mask), std::move(hits)};
}

// Clears connected components with area < k_min (4- or 8-connectivity).
inline Mask remove_small_components(const Mask& in, std::size_t k_min, int connectivity = 8) {
    require(connectivity == 4 || connectivity == 8, "downstream",
            "connectivity must be 4 or 8");
    Mask out = in;
    std::vector<std::uint8_t> seen(in.rows * in.cols, 0);
    std::vector<std::size_t> stack, comp;
    const int dx4[] = {1, -1, 0, 0}, dy4[] = {0, 0, 1, -1};
    const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1}, dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
    const int* dx = (connectivity == 4) ? dx4 : dx8;
    const int* dy = (connectivity == 4) ? dy4 : dy8;
    const int ndir = connectivity;
    for (std::size_t start = 0; start < in.m.size(); ++start) {
        if (!in.m[start] || seen[start]) continue;
        stack.assign(1, start);
        comp.clear();
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            comp.push_back(cur);
            const auto r = static_cast<long long>(cur / in.cols);
            const auto c = static_cast<long long>(cur % in.cols);
            for (int d = 0; d < ndir; ++d) {
                const long long rr = r + dy[d], cc = c + dx[d];
                if (rr < 0 || cc < 0 || rr >= static_cast<long long>(in.rows) ||
                    cc >= static_cast<long long>(in.cols))
                    continue;
                const std::size_t ni = static_cast<std::size_t>(rr) * in.cols +
                                       static_cast<std::size_t>(cc);
                if (in.m[ni] && !seen[ni]) {
                    seen[ni] = 1;
                    stack.push_back(ni);
                }
            }
        }
        if (comp.size() < k_min)
            for (std::size_t i : comp) out.m[i] = 0;
    }
    return out;
}

struct SegConfig {
    int kernel = 5;          // boxcar side K
    double tau_db = -9.0;    // threshold on normalized intensity
    std::size_t a_min = 600; // minimum component area kept
    int connectivity = 8;

    void validate() const {
        require(kernel >= 1 && kernel % 2 == 1, "downstream", "segment: K must be odd >= 1");
        require(connectivity == 4 || connectivity == 8, "downstream",
                "segment: connectivity must be 4 or 8");
    }
};

// Water mask: boxcar-smoothed intensity, mean-normalized dB threshold, then
// 8-connectivity cleanup keeping components of at least a_min pixels.
inline Mask water_mask(const Raster& img, const SegConfig& cfg) {
    cfg.validate();
    require(img.rows >= 1 && img.cols >= 1, "downstream", "segment: empty raster");
    require(static_cast<std::size_t>(cfg.kernel) <= img.rows &&
                static_cast<std::size_t>(cfg.kernel) <= img.cols,
            "downstream", "segment: kernel larger than raster");
    const int half = cfg.kernel / 2;
    std::vector<double> intensity(img.rows * img.cols);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double re = img.data[i].real(), im = img.data[i].imag();
        intensity[i] = re * re + im * im;
    }
    // Separable boxcar with reflect padding.
    std::vector<double> tmp(intensity.size()), smooth(intensity.size());
    for (std::size_t k = 0; k < img.rows; ++k)
        for (std::size_t j = 0; j < img.cols; ++j) {
            double s = 0.0;
            for (int d = -half; d <= half; ++d)
                s += intensity[k * img.cols +
                               detail::reflect(static_cast<long long>(j) + d, img.cols)];
            tmp[k * img.cols + j] = s;
        }
    const double inv_area = 1.0 / (static_cast<double>(cfg.kernel) * cfg.kernel);
    for (std::size_t k = 0; k < img.rows; ++k)
        for (std::size_t j = 0; j < img.cols; ++j) {
            double s = 0.0;
            for (int d = -half; d <= half; ++d)
                s += tmp[detail::reflect(static_cast<long long>(k) + d, img.rows) * img.cols + j];
            smooth[k * img.cols + j] = s * inv_area;
        }
    double mean = 0.0;
    for (double v : smooth) mean += v;
    mean /= static_cast<double>(smooth.size());
    Mask m(img.rows, img.cols);
    for (std::size_t i = 0; i < smooth.size(); ++i) {
        const double norm = (mean > 0.0) ? smooth[i] / mean : 0.0;
        const double db = 10.0 * std::log10(norm + kDbEps);
        m.m[i] = (db < cfg.tau_db) ? 1 : 0;
    }
    return remove_small_components(m, cfg.a_min, cfg.connectivity);
}

// Run-length sidecar: one "row col_start run_len" line per run.
inline std::string mask_to_rle(const Mask& m) {
    std::string out;
    for (std::size_t k = 0; k < m.rows; ++k) {
        std::size_t j = 0;
        while (j < m.cols) {
            if (!m.at(k, j)) {
                ++j;
                continue;
            }
            std::size_t start = j;
            while (j < m.cols && m.at(k, j)) ++j;
            out += std::to_string(k) + " " + std::to_string(start) + " " +
                   std::to_string(j - start) + "\n";
        }
    }
    return out;
}

inline GrayImage mask_to_image(const Mask& m) {
    GrayImage img{m.rows, m.cols, std::vector<std::uint16_t>(m.m.size())};
    for (std::size_t i = 0; i < m.m.size(); ++i) img.pix[i] = m.m[i] ? 65535 : 0;
    return img;
}

}  // namespace osp::downstream
