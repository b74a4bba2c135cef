#pragma once

// Azimuth-focusing objective: complex fidelity plus amplitude-structure
// subterms on one-dimensional azimuth strips, per-strip informativeness
// reweighting, teacher-student distillation discrepancies, and the
// evaluation metrics with their dense-rank score.
//
// The complex term acts in the normalized field; every amplitude-based term
// acts on inverse-normalized physical amplitudes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "osp/error.hpp"
#include "osp/fft.hpp"
#include "osp/sarcore.hpp"

namespace osp::loss {

using fft::cd;

struct StripPair {
    std::vector<cd> pred;    // normalized space
    std::vector<cd> target;  // normalized space
    NormalizationSpec norm;

    std::size_t len() const { return pred.size(); }
    void validate() const {
        require(pred.size() == target.size(), "loss", "strip lengths differ");
        require(pred.size() >= 3, "loss", "strips must have length >= 3");
    }
};

struct LossWeights {
    double w_c = 0.0, w_log = 0.0, w_ac = 0.0, w_tail = 0.0;
    double w_grad = 0.0, w_psd = 0.0, w_fw = 0.0, w_edge = 0.0;
    double eps = 1e-3;
    double psd_f_min = 0.15, psd_f_max = 0.50;

    void validate() const {
        require(w_c >= 0 && w_log >= 0 && w_ac >= 0 && w_tail >= 0 && w_grad >= 0 &&
                    w_psd >= 0 && w_fw >= 0 && w_edge >= 0,
                "loss", "weights must be non-negative");
        require(eps > 0.0, "loss", "eps must be > 0");
        require(psd_f_min >= 0.0 && psd_f_min < psd_f_max && psd_f_max <= 0.5, "loss",
                "psd band must satisfy 0 <= f_min < f_max <= 0.5");
    }

    static LossWeights teacher() {
        LossWeights w;
        w.w_c = 0.04; w.w_log = 0.18; w.w_ac = 0.18; w.w_tail = 0.12;
        w.w_grad = 0.24; w.w_psd = 0.04; w.w_fw = 0.04; w.w_edge = 0.08;
        return w;
    }
    static LossWeights student() {
        LossWeights w;
        w.w_c = 0.35; w.w_log = 0.08; w.w_ac = 0.08; w.w_tail = 0.03;
        w.w_grad = 0.02; w.w_psd = 0.01; w.w_fw = 0.0; w.w_edge = 0.005;
        return w;
    }
};

struct KdWeights {
    double lambda_kd = 0.05;
    double alpha_c = 0.25, alpha_l = 0.0, alpha_rho = 0.08, alpha_phi = 0.05;
    double eps_phi = 1e-6;
    double p_phi = 1.0;

    void validate() const {
        require(lambda_kd >= 0 && alpha_c >= 0 && alpha_l >= 0 && alpha_rho >= 0 &&
                    alpha_phi >= 0 && eps_phi > 0,
                "loss", "kd weights must be non-negative, eps_phi > 0");
    }
};

namespace detail {

inline std::vector<double> phys_amplitude(const std::vector<cd>& z, double scale) {
    std::vector<double> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::abs(z[i]) * scale;
    return a;
}

inline std::vector<double> log_amp(const std::vector<double>& a, double eps) {
    std::vector<double> l(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) l[i] = std::log(a[i] + eps);
    return l;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Pearson correlation with the +eps denominator guard; constant inputs give
// a value near zero rather than NaN.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b, double eps) {
    const double ma = mean(a), mb = mean(b);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / (std::sqrt(da * db) + eps);
}

// Nearest-rank quantile on a sorted copy: q_p = sorted[ceil(p*L)] (1-based).
inline double quantile_nearest_rank(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const auto n = static_cast<double>(v.size());
    auto idx = static_cast<std::size_t>(std::ceil(p * n));
    if (idx == 0) idx = 1;
    if (idx > v.size()) idx = v.size();
    return v[idx - 1];
}

// Band indices of rfftfreq(L) within [f_min, f_max].
inline std::vector<std::size_t> psd_band(std::size_t len, double f_min, double f_max) {
    std::vector<std::size_t> band;
    for (std::size_t k = 0; k <= len / 2; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(len);
        if (f >= f_min && f <= f_max) band.push_back(k);
    }
    return band;
}

// |rFFT(l - mean(l))|^2 on the exact length-L grid.
inline std::vector<double> periodogram(const std::vector<double>& l) {
    const double m = mean(l);
    std::vector<double> centered(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) centered[i] = l[i] - m;
    const std::vector<cd> spec = fft::rfft(centered);
    std::vector<double> p(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) p[i] = std::norm(spec[i]);
    return p;
}

// First non-negative lag where the normalized autocorrelation of the centered
// strip drops below 0.5; L if it never does.
inline std::size_t focus_width(const std::vector<double>& l, double eps) {
    const std::size_t n = l.size();
    const double m = mean(l);
    const std::size_t pad = fft::next_pow2(2 * n);  // >= 2n-1: linear autocorrelation
    std::vector<cd> x(pad, cd{0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) x[i] = cd{l[i] - m, 0.0};
    fft::fft_inplace(x, false);
    for (auto& v : x) v = cd{std::norm(v), 0.0};
    fft::fft_inplace(x, true);
    const double denom = x[0].real() + eps;
    for (std::size_t tau = 0; tau < n; ++tau) {
        if (x[tau].real() / denom < 0.5) return tau;
    }
    return n;
}

}  // namespace detail

// Mean complex-magnitude error in the normalized field.
inline double l_complex(const StripPair& p) {
    p.validate();
    double s = 0.0;
    for (std::size_t i = 0; i < p.len(); ++i) s += std::abs(p.pred[i] - p.target[i]);
    return s / static_cast<double>(p.len());
}

inline double l_logamp(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto la = detail::log_amp(detail::phys_amplitude(p.pred, p.norm.scale), w.eps);
    const auto lb = detail::log_amp(detail::phys_amplitude(p.target, p.norm.scale), w.eps);
    double s = 0.0;
    for (std::size_t i = 0; i < la.size(); ++i) s += std::abs(la[i] - lb[i]);
    return s / static_cast<double>(la.size());
}

// 1 - clip(pearson(a_hat, a), -1, 1), in [0, 2].
inline double l_ampcorr(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto a = detail::phys_amplitude(p.pred, p.norm.scale);
    const auto b = detail::phys_amplitude(p.target, p.norm.scale);
    const double rho = std::clamp(detail::pearson(a, b, w.eps), -1.0, 1.0);
    return 1.0 - rho;
}

inline double l_tail(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto a = detail::phys_amplitude(p.pred, p.norm.scale);
    const auto b = detail::phys_amplitude(p.target, p.norm.scale);
    const double q95 = std::log((detail::quantile_nearest_rank(a, 0.95) + w.eps) /
                                (detail::quantile_nearest_rank(b, 0.95) + w.eps));
    const double q99 = std::log((detail::quantile_nearest_rank(a, 0.99) + w.eps) /
                                (detail::quantile_nearest_rank(b, 0.99) + w.eps));
    return std::abs(q95) + 0.5 * std::abs(q99);
}

inline double l_grad(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto la = detail::log_amp(detail::phys_amplitude(p.pred, p.norm.scale), w.eps);
    const auto lb = detail::log_amp(detail::phys_amplitude(p.target, p.norm.scale), w.eps);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < la.size(); ++i)
        s += std::abs((la[i + 1] - la[i]) - (lb[i + 1] - lb[i]));
    return s / static_cast<double>(la.size() - 1);
}

// Mean abs difference of band-normalized periodograms of the mean-removed
// log-amplitudes.
inline double l_psd(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto band = detail::psd_band(p.len(), w.psd_f_min, w.psd_f_max);
    require(!band.empty(), "loss", "psd band empty for strip length " + std::to_string(p.len()));
    const auto la = detail::log_amp(detail::phys_amplitude(p.pred, p.norm.scale), w.eps);
    const auto lb = detail::log_amp(detail::phys_amplitude(p.target, p.norm.scale), w.eps);
    const auto pa = detail::periodogram(la);
    const auto pb = detail::periodogram(lb);
    double sa = 0.0, sb = 0.0;
    for (std::size_t k : band) {
        sa += pa[k];
        sb += pb[k];
    }
    double s = 0.0;
    for (std::size_t k : band) s += std::abs(pa[k] / (sa + w.eps) - pb[k] / (sb + w.eps));
    return s / static_cast<double>(band.size());
}

inline double l_focuswidth(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto la = detail::log_amp(detail::phys_amplitude(p.pred, p.norm.scale), w.eps);
    const auto lb = detail::log_amp(detail::phys_amplitude(p.target, p.norm.scale), w.eps);
    const auto fa = static_cast<double>(detail::focus_width(la, w.eps));
    const auto fb = static_cast<double>(detail::focus_width(lb, w.eps));
    return std::abs(fa - fb) / (fb + w.eps);
}

inline double l_edge(const StripPair& p, const LossWeights& w) {
    p.validate();
    const auto la = detail::log_amp(detail::phys_amplitude(p.pred, p.norm.scale), w.eps);
    const auto lb = detail::log_amp(detail::phys_amplitude(p.target, p.norm.scale), w.eps);
    double s = 0.0;
    for (std::size_t i = 0; i + 2 < la.size(); ++i) {
        const double da = la[i + 2] - 2.0 * la[i + 1] + la[i];
        const double db = lb[i + 2] - 2.0 * lb[i + 1] + lb[i];
        s += std::abs(da - db);
    }
    return s / static_cast<double>(la.size() - 2);
}

struct AfBreakdown {
    double complex_term = 0, logamp = 0, ampcorr = 0, tail = 0;
    double grad = 0, psd = 0, focuswidth = 0, edge = 0;
    double total = 0;
};

inline AfBreakdown af_loss(const StripPair& p, const LossWeights& w) {
    p.validate();
    w.validate();
    AfBreakdown b;
    b.complex_term = l_complex(p);
    b.logamp = l_logamp(p, w);
    b.ampcorr = l_ampcorr(p, w);
    b.tail = l_tail(p, w);
    b.grad = l_grad(p, w);
    b.psd = l_psd(p, w);
    b.focuswidth = l_focuswidth(p, w);
    b.edge = l_edge(p, w);
    b.total = w.w_c * b.complex_term + w.w_log * b.logamp + w.w_ac * b.ampcorr +
              w.w_tail * b.tail + w.w_grad * b.grad + w.w_psd * b.psd +
              w.w_fw * b.focuswidth + w.w_edge * b.edge;
    return b;
}

// Per-strip weights W_i = 0.75 + 0.50 eta_i from min-max-normalized
// informativeness I_i = G_i + H_i/2 over the batch of target strips.
inline std::vector<double> informativeness_weights(const std::vector<std::vector<cd>>& targets,
                                                   const NormalizationSpec& norm,
                                                   const LossWeights& w) {
    require(!targets.empty(), "loss", "informativeness: empty batch");
    std::vector<double> info(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto l = detail::log_amp(detail::phys_amplitude(targets[i], norm.scale), w.eps);
        require(l.size() >= 2, "loss", "informativeness: strip too short");
        double g = 0.0;
        for (std::size_t j = 0; j + 1 < l.size(); ++j) g += std::abs(l[j + 1] - l[j]);
        g /= static_cast<double>(l.size() - 1);
        const auto band = detail::psd_band(l.size(), w.psd_f_min, w.psd_f_max);
        require(!band.empty(), "loss", "informativeness: psd band empty");
        const auto per = detail::periodogram(l);
        double h = 0.0;
        for (std::size_t k : band) h += per[k];
        h /= static_cast<double>(band.size());
        info[i] = g + 0.5 * h;
    }
    double lo = info[0], hi = info[0];
    for (double v : info) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(info.size());
    for (std::size_t i = 0; i < info.size(); ++i) {
        const double eta = (info[i] - lo) / (hi - lo + w.eps);
        out[i] = 0.75 + 0.50 * eta;
    }
    return out;
}

// Distillation discrepancy against a frozen teacher prediction. The complex
// anchor is a mean squared magnitude error in the normalized field; the
// log-amplitude and correlation terms reuse the ground-truth definitions with
// the teacher as target; the phase term compares amplitude-masked unit
// vectors.
inline double kd_loss(const std::vector<cd>& student, const std::vector<cd>& teacher,
                      const NormalizationSpec& norm, const LossWeights& w, const KdWeights& kw) {
    require(student.size() == teacher.size(), "loss", "kd: strip lengths differ");
    kw.validate();
    const std::size_t n = student.size();
    double total = 0.0;
    if (kw.alpha_c != 0.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::norm(student[i] - teacher[i]);
        total += kw.alpha_c * s / static_cast<double>(n);
    }
    if (kw.alpha_l != 0.0 || kw.alpha_rho != 0.0) {
        StripPair sp{student, teacher, norm};
        if (kw.alpha_l != 0.0) total += kw.alpha_l * l_logamp(sp, w);
        if (kw.alpha_rho != 0.0) total += kw.alpha_rho * l_ampcorr(sp, w);
    }
    if (kw.alpha_phi != 0.0) {
        double num = 0.0, den = 0.0;
        double mean_amp_p = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean_amp_p += std::pow(std::abs(teacher[i]), kw.p_phi);
        mean_amp_p /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const cd vs = student[i] / (std::abs(student[i]) + kw.eps_phi);
            const cd vt = teacher[i] / (std::abs(teacher[i]) + kw.eps_phi);
            const double m = std::pow(std::abs(teacher[i]), kw.p_phi) / (mean_amp_p + kw.eps_phi);
            num += m * std::norm(vs - vt);
            den += m;
        }
        total += kw.alpha_phi * num / (den + kw.eps_phi);
    }
    return total;
}

// L_student = L_AF(pred, target) + lambda_KD * KD(pred, teacher). The teacher
// prediction is treated as a constant.
inline double student_loss(const std::vector<cd>& pred, const std::vector<cd>& target,
                           const std::vector<cd>& teacher, const NormalizationSpec& norm,
                           const LossWeights& w, const KdWeights& kw) {
    const AfBreakdown af = af_loss(StripPair{pred, target, norm}, w);
    if (kw.lambda_kd == 0.0) return af.total;
    return af.total + kw.lambda_kd * kd_loss(pred, teacher, norm, w, kw);
}

// ---------------------------------------------------------------------------
// Evaluation metrics. All computed on physical (inverse-normalized) samples.

struct Metrics {
    double rmse = 0;
    double amp_corr = 0;
    double complex_coh = 0;
    double phase_coh = 0;
    double phase_mae_deg = 0;
    double phase_rmse_deg = 0;
    double psnr_db = 0;
    double enl_ratio = 0;
};

inline constexpr double kPhaseSupportEps = 1e-6;

inline Metrics metrics(const std::vector<cd>& pred, const std::vector<cd>& target) {
    require(pred.size() == target.size() && !pred.empty(), "loss", "metrics: size mismatch");
    const std::size_t n = pred.size();
    Metrics m;
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) se += std::norm(pred[i] - target[i]);
    m.rmse = std::sqrt(se / static_cast<double>(n));

    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::abs(pred[i]);
        b[i] = std::abs(target[i]);
    }
    m.amp_corr = std::clamp(detail::pearson(a, b, 1e-12), -1.0, 1.0);

    cd cross{0.0, 0.0};
    double pa = 0.0, pb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cross += pred[i] * std::conj(target[i]);
        pa += std::norm(pred[i]);
        pb += std::norm(target[i]);
    }
    m.complex_coh = (pa > 0.0 && pb > 0.0) ? std::abs(cross) / std::sqrt(pa * pb) : 0.0;

    cd phasor{0.0, 0.0};
    double mae = 0.0, mse = 0.0;
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] <= kPhaseSupportEps || b[i] <= kPhaseSupportEps) continue;
        const double dphi = std::arg(pred[i] * std::conj(target[i]));
        phasor += cd{std::cos(dphi), std::sin(dphi)};
        mae += std::abs(dphi);
        mse += dphi * dphi;
        ++support;
    }
    if (support > 0) {
        const double deg = 180.0 / fft::kPi;
        m.phase_coh = std::abs(phasor) / static_cast<double>(support);
        m.phase_mae_deg = mae / static_cast<double>(support) * deg;
        m.phase_rmse_deg = std::sqrt(mse / static_cast<double>(support)) * deg;
    }

    double peak = 0.0, amp_mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        peak = std::max(peak, b[i]);
        amp_mse += (a[i] - b[i]) * (a[i] - b[i]);
    }
    amp_mse /= static_cast<double>(n);
    m.psnr_db = (amp_mse > 0.0 && peak > 0.0)
                    ? 10.0 * std::log10(peak * peak / amp_mse)
                    : std::numeric_limits<double>::infinity();

    auto enl = [n](const std::vector<double>& v) {
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (double x : v) var += (x - mu) * (x - mu);
        var /= static_cast<double>(n);
        return (var > 0.0) ? mu * mu / var : std::numeric_limits<double>::infinity();
    };
    const double enl_t = enl(b);
    const double enl_p = enl(a);
    m.enl_ratio = (std::isfinite(enl_t) && enl_t > 0.0 && std::isfinite(enl_p))
                      ? enl_p / enl_t
                      : 1.0;
    return m;
}

inline Metrics metrics(const Raster& pred, const Raster& target) {
    require(pred.rows == target.rows && pred.cols == target.cols, "loss",
            "metrics: raster dims differ");
    std::vector<cd> a(pred.data.size()), b(target.data.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = cd{pred.data[i].real(), pred.data[i].imag()};
        b[i] = cd{target.data[i].real(), target.data[i].imag()};
    }
    return metrics(a, b);
}

// Rank score s = (rk_R + rk_C) / 2: dense rank of RMSE ascending and of
// amplitude correlation descending.
struct RunMetrics {
    double rmse = 0;
    double amp_corr = 0;
};

inline std::vector<double> rank_score(const std::vector<RunMetrics>& runs) {
    require(!runs.empty(), "loss", "rank_score: empty run list");
    auto dense_rank = [&](auto key, bool ascending) {
        std::vector<double> vals;
        for (const auto& r : runs) vals.push_back(key(r));
        std::vector<double> uniq = vals;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (!ascending) std::reverse(uniq.begin(), uniq.end());
        std::vector<double> rk(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const auto it = std::find(uniq.begin(), uniq.end(), vals[i]);
            rk[i] = static_cast<double>(it - uniq.begin()) + 1.0;
        }
        return rk;
    };
    const auto rk_r = dense_rank([](const RunMetrics& r) { return r.rmse; }, true);
    const auto rk_c = dense_rank([](const RunMetrics& r) { return r.amp_corr; }, false);
    std::vector<double> s(runs.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.5 * (rk_r[i] + rk_c[i]);
    return s;
}

}  // namespace osp::loss
