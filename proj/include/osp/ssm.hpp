#pragma once

// The learned azimuth-focusing surrogate: diagonal state-space layers with a
// convolutional (training) and a recurrent (deployment) evaluation mode, the
// tiny per-range-bin student network, and the streaming engine that emits one
// focused row per incoming pulse.

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "osp/error.hpp"
#include "osp/fft.hpp"
#include "osp/rda.hpp"
#include "osp/sarcore.hpp"

namespace osp::ssm {

using fft::cd;

enum class Discretization : std::uint8_t { Zoh = 0, Bilinear = 1 };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct Rng {
    std::uint64_t s;
    explicit Rng(std::uint64_t seed) : s(seed ^ 0xA3C59AC2B7F3C1E5ull) { splitmix64(s); }
    double unit() { return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53; }
    double gauss() {  // Box-Muller, N(0, 1)
        const double u1 = 1.0 - unit();
        const double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * fft::kPi * u2);
    }
};

}  // namespace detail

// Diagonal state-space layer. lambda/b/c are channel-major (channels x
// state_dim); d and log_dt are per channel. Stability: Re(lambda) < 0.
struct S4dLayer {
    std::size_t state_dim = 0;
    std::size_t channels = 0;
    std::vector<cd> lambda, b, c;       // channels * state_dim
    std::vector<double> d, log_dt;      // channels
    Discretization disc = Discretization::Zoh;

    std::size_t modes() const { return channels * state_dim; }

    void validate() const {
        require(state_dim >= 1 && channels >= 1, "ssm", "layer dims must be >= 1");
        require(lambda.size() == modes() && b.size() == modes() && c.size() == modes() &&
                    d.size() == channels && log_dt.size() == channels,
                "ssm", "layer parameter shapes do not match dims");
        for (const cd& l : lambda)
            require(l.real() < 0.0, "ssm", "unstable mode: Re(lambda) must be < 0");
    }
};

// lambda_n = -1/2 + i pi n; b, c drawn from a unit-variance complex Gaussian;
// d = 1; log_dt uniform in [log 1e-3, log 1e-1].
inline S4dLayer s4d_lin_init(std::size_t state_dim, std::size_t channels, std::uint64_t seed) {
    require(state_dim >= 1 && channels >= 1, "ssm", "s4d_lin_init: dims must be >= 1");
    S4dLayer l;
    l.state_dim = state_dim;
    l.channels = channels;
    l.lambda.resize(l.modes());
    l.b.resize(l.modes());
    l.c.resize(l.modes());
    l.d.assign(channels, 1.0);
    l.log_dt.resize(channels);
    detail::Rng rng(seed);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t h = 0; h < channels; ++h) {
        for (std::size_t n = 0; n < state_dim; ++n) {
            l.lambda[h * state_dim + n] = cd{-0.5, fft::kPi * static_cast<double>(n)};
            l.b[h * state_dim + n] = cd{rng.gauss() * inv_sqrt2, rng.gauss() * inv_sqrt2};
            l.c[h * state_dim + n] = cd{rng.gauss() * inv_sqrt2, rng.gauss() * inv_sqrt2};
        }
        const double lo = std::log(1e-3), hi = std::log(1e-1);
        l.log_dt[h] = lo + (hi - lo) * rng.unit();
    }
    return l;
}

struct DiscreteCoeffs {
    std::vector<cd> lambda_bar, b_bar;  // channels * state_dim
};

inline DiscreteCoeffs discretize(const S4dLayer& l) {
    l.validate();
    DiscreteCoeffs out;
    out.lambda_bar.resize(l.modes());
    out.b_bar.resize(l.modes());
    for (std::size_t h = 0; h < l.channels; ++h) {
        const double dt = std::exp(l.log_dt[h]);
        for (std::size_t n = 0; n < l.state_dim; ++n) {
            const std::size_t i = h * l.state_dim + n;
            const cd lam = l.lambda[i];
            if (l.disc == Discretization::Zoh) {
                const cd lb = std::exp(lam * dt);
                out.lambda_bar[i] = lb;
                out.b_bar[i] = (lb - 1.0) / lam * l.b[i];
            } else {
                const cd den = 1.0 - lam * (dt / 2.0);
                out.lambda_bar[i] = (1.0 + lam * (dt / 2.0)) / den;
                out.b_bar[i] = (dt / den) * l.b[i];
            }
        }
    }
    return out;
}

// k[h][l] = 2 Re(sum_n c_n lambda_bar_n^l b_bar_n), channel-major.
inline std::vector<double> s4d_kernel(const S4dLayer& l, std::size_t len) {
    require(len >= 1, "ssm", "s4d_kernel: length must be >= 1");
    const DiscreteCoeffs dc = discretize(l);
    std::vector<double> k(l.channels * len, 0.0);
    std::vector<cd> pw(l.modes());
    for (std::size_t i = 0; i < l.modes(); ++i) pw[i] = dc.b_bar[i];
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t h = 0; h < l.channels; ++h) {
            cd acc{0.0, 0.0};
            for (std::size_t n = 0; n < l.state_dim; ++n)
                acc += l.c[h * l.state_dim + n] * pw[h * l.state_dim + n];
            k[h * len + t] = 2.0 * acc.real();
        }
        if (t + 1 < len)
            for (std::size_t i = 0; i < l.modes(); ++i) pw[i] *= dc.lambda_bar[i];
    }
    return k;
}

namespace detail {

// Causal linear convolution of a length-L kernel with a length-L signal via a
// zero-padded FFT (size >= 2L-1, so no circular wrap), cropped back to L.
inline void causal_conv_inplace(const std::vector<cd>& kernel_fft, std::vector<double>& u) {
    const std::size_t len = u.size();
    const std::size_t m = kernel_fft.size();
    std::vector<cd> x(m, cd{0.0, 0.0});
    for (std::size_t t = 0; t < len; ++t) x[t] = cd{u[t], 0.0};
    fft::fft_inplace(x, false);
    for (std::size_t i = 0; i < m; ++i) x[i] *= kernel_fft[i];
    fft::fft_inplace(x, true);
    for (std::size_t t = 0; t < len; ++t) u[t] = x[t].real();
}

inline std::vector<cd> kernel_fft_of(std::span<const double> k, std::size_t m) {
    std::vector<cd> kf(m, cd{0.0, 0.0});
    for (std::size_t t = 0; t < k.size(); ++t) kf[t] = cd{k[t], 0.0};
    fft::fft_inplace(kf, false);
    return kf;
}

}  // namespace detail

// Convolutional evaluation over a full strip. `u` is channel-major
// (channels x L). Equals the zero-initial-state recurrence exactly.
inline std::vector<double> s4d_forward_conv(const S4dLayer& l, const std::vector<double>& u,
                                            std::size_t len) {
    require(u.size() == l.channels * len, "ssm", "s4d_forward_conv: strip shape mismatch");
    const std::vector<double> k = s4d_kernel(l, len);
    const std::size_t m = fft::next_pow2(2 * len);
    std::vector<double> y(u.size());
    for (std::size_t h = 0; h < l.channels; ++h) {
        std::vector<double> ch(u.begin() + h * len, u.begin() + (h + 1) * len);
        const std::vector<cd> kf =
            detail::kernel_fft_of({k.data() + h * len, len}, m);
        detail::causal_conv_inplace(kf, ch);
        for (std::size_t t = 0; t < len; ++t) y[h * len + t] = ch[t] + l.d[h] * u[h * len + t];
    }
    return y;
}

// One recurrent step: state' = lambda_bar . state + b_bar u; y = 2 Re(c .
// state') + d u. State is channels x state_dim.
inline void s4d_step(const S4dLayer& l, const DiscreteCoeffs& dc, std::span<cd> state,
                     std::span<const double> u, std::span<double> y) {
    require(state.size() == l.modes() && u.size() == l.channels && y.size() == l.channels,
            "ssm", "s4d_step: shape mismatch");
    for (std::size_t h = 0; h < l.channels; ++h) {
        double acc = 0.0;
        const std::size_t base = h * l.state_dim;
        for (std::size_t n = 0; n < l.state_dim; ++n) {
            const std::size_t i = base + n;
            state[i] = dc.lambda_bar[i] * state[i] + dc.b_bar[i] * u[h];
            const cd cs = l.c[i] * state[i];
            acc += cs.real();
        }
        y[h] = 2.0 * acc + l.d[h] * u[h];
    }
}

inline void s4d_step(const S4dLayer& l, std::span<cd> state, std::span<const double> u,
                     std::span<double> y) {
    const DiscreteCoeffs dc = discretize(l);
    s4d_step(l, dc, state, u, y);
}

// ---------------------------------------------------------------------------
// Tiny student network: fc1 -> ssm2 -> act -> fc3 -> ssm4 -> act -> fc5 ->
// ssm6 -> act -> fc7 -> ssm8 -> act -> fc9 -> fc10. Input per range cell is
// (re, im, p_r); output is (re, im).

struct Linear {
    std::size_t out_dim = 0, in_dim = 0;
    std::vector<double> w;     // out x in, row-major
    std::vector<double> bias;  // out

    void apply(std::span<const double> x, std::span<double> y) const {
        for (std::size_t o = 0; o < out_dim; ++o) {
            double acc = bias[o];
            for (std::size_t i = 0; i < in_dim; ++i) acc += w[o * in_dim + i] * x[i];
            y[o] = acc;
        }
    }
};

struct TinyConfig {
    std::size_t n_layers = 4;
    std::size_t channels = 2;
    std::size_t state_dim = 8;
    std::size_t in_dim = 3;
    std::size_t out_dim = 2;
    double leaky_slope = 0.01;
    Discretization disc = Discretization::Zoh;
};

struct ParamCount {
    std::size_t floats = 0;           // every stored real number
    std::size_t entries = 0;          // complex pairs counted once
    std::size_t complex_entries = 0;  // number of complex-valued parameters
};

struct TinyModel {
    TinyConfig cfg;
    std::vector<S4dLayer> layers;   // cfg.n_layers
    std::vector<Linear> fc_front;   // n_layers entries: fc1, fc3, fc5, fc7
    Linear fc_pre;                  // fc9
    Linear fc_out;                  // fc10

    void validate() const {
        require(layers.size() == cfg.n_layers && fc_front.size() == cfg.n_layers, "ssm",
                "model layer list shape mismatch");
        for (const auto& l : layers) l.validate();
    }

    ParamCount param_count() const {
        ParamCount pc;
        for (const auto& l : layers) {
            pc.complex_entries += 3 * l.modes();
            pc.floats += 6 * l.modes() + 2 * l.channels;
            pc.entries += 3 * l.modes() + 2 * l.channels;
        }
        auto add_fc = [&pc](const Linear& f) {
            pc.floats += f.w.size() + f.bias.size();
            pc.entries += f.w.size() + f.bias.size();
        };
        for (const auto& f : fc_front) add_fc(f);
        add_fc(fc_pre);
        add_fc(fc_out);
        return pc;
    }

    std::size_t state_per_bin() const { return cfg.n_layers * cfg.channels * cfg.state_dim; }
};

namespace detail {

inline Linear linear_init(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
    Linear f;
    f.out_dim = out_dim;
    f.in_dim = in_dim;
    f.w.resize(out_dim * in_dim);
    f.bias.assign(out_dim, 0.0);
    const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& v : f.w) v = rng.gauss() * s;
    return f;
}

}  // namespace detail

inline TinyModel tiny_init(const TinyConfig& cfg, std::uint64_t seed) {
    TinyModel m;
    m.cfg = cfg;
    detail::Rng rng(seed * 0x9E3779B97F4A7C15ull + 1);
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        S4dLayer l = s4d_lin_init(cfg.state_dim, cfg.channels, seed + 101 * (i + 1));
        l.disc = cfg.disc;
        m.layers.push_back(std::move(l));
        m.fc_front.push_back(
            detail::linear_init(cfg.channels, i == 0 ? cfg.in_dim : cfg.channels, rng));
    }
    m.fc_pre = detail::linear_init(cfg.channels, cfg.channels, rng);
    m.fc_out = detail::linear_init(cfg.out_dim, cfg.channels, rng);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Flat parameter vector (FD training and checkpoints share this order):
// per S4D layer: lambda re, lambda im, b re, b im, c re, c im, d, log_dt;
// then fc1..fc7, fc9, fc10 as (w row-major, bias).

inline std::vector<double> flatten_params(const TinyModel& m) {
    std::vector<double> out;
    auto push_cvec = [&out](const std::vector<cd>& v) {
        for (const cd& z : v) out.push_back(z.real());
        for (const cd& z : v) out.push_back(z.imag());
    };
    for (const auto& l : m.layers) {
        push_cvec(l.lambda);
        push_cvec(l.b);
        push_cvec(l.c);
        out.insert(out.end(), l.d.begin(), l.d.end());
        out.insert(out.end(), l.log_dt.begin(), l.log_dt.end());
    }
    auto push_fc = [&out](const Linear& f) {
        out.insert(out.end(), f.w.begin(), f.w.end());
        out.insert(out.end(), f.bias.begin(), f.bias.end());
    };
    for (const auto& f : m.fc_front) push_fc(f);
    push_fc(m.fc_pre);
    push_fc(m.fc_out);
    return out;
}

inline void unflatten_params(TinyModel& m, std::span<const double> v) {
    std::size_t pos = 0;
    auto take_cvec = [&](std::vector<cd>& dst) {
        const std::size_t n = dst.size();
        for (std::size_t i = 0; i < n; ++i) dst[i].real(v[pos + i]);
        for (std::size_t i = 0; i < n; ++i) dst[i].imag(v[pos + n + i]);
        pos += 2 * n;
    };
    for (auto& l : m.layers) {
        take_cvec(l.lambda);
        take_cvec(l.b);
        take_cvec(l.c);
        for (auto& x : l.d) x = v[pos++];
        for (auto& x : l.log_dt) x = v[pos++];
    }
    auto take_fc = [&](Linear& f) {
        for (auto& x : f.w) x = v[pos++];
        for (auto& x : f.bias) x = v[pos++];
    };
    for (auto& f : m.fc_front) take_fc(f);
    take_fc(m.fc_pre);
    take_fc(m.fc_out);
    require(pos == v.size(), "ssm", "unflatten_params: size mismatch");
}

// ---------------------------------------------------------------------------
// Strip-mode (convolutional) evaluation.

namespace detail {

inline void leaky_inplace(std::vector<double>& x, double slope) {
    for (auto& v : x)
        if (v < 0.0) v *= slope;
}

}  // namespace detail

// Runs a whole model over batches of equal-length strips, computing each
// layer's kernel FFT once.
class TinyRunner {
public:
    TinyRunner(const TinyModel& m, std::size_t len) : m_(&m), len_(len) {
        m.validate();
        require(len >= 1, "ssm", "strip length must be >= 1");
        fft_len_ = fft::next_pow2(2 * len);
        for (const auto& l : m.layers) {
            const std::vector<double> k = s4d_kernel(l, len);
            std::vector<std::vector<cd>> per_ch;
            for (std::size_t h = 0; h < l.channels; ++h)
                per_ch.push_back(detail::kernel_fft_of({k.data() + h * len, len}, fft_len_));
            kernel_ffts_.push_back(std::move(per_ch));
        }
    }

    // strip: normalized complex samples of one range bin; p_r in [0, 1].
    std::vector<cd> forward(std::span<const cd> strip, double p_r) const {
        require(strip.size() == len_, "ssm", "forward: strip length mismatch");
        const TinyConfig& cfg = m_->cfg;
        const std::size_t H = cfg.channels;
        // Input channels (in_dim x L).
        std::vector<double> cur(cfg.in_dim * len_);
        for (std::size_t t = 0; t < len_; ++t) {
            cur[0 * len_ + t] = strip[t].real();
            cur[1 * len_ + t] = strip[t].imag();
            if (cfg.in_dim > 2) cur[2 * len_ + t] = p_r;
        }
        std::size_t cur_ch = cfg.in_dim;
        std::vector<double> nxt;
        for (std::size_t li = 0; li < cfg.n_layers; ++li) {
            apply_fc_strip(m_->fc_front[li], cur, cur_ch, nxt);
            cur.swap(nxt);
            cur_ch = H;
            ssm_conv_strip(li, cur);
            for (double v : cur)
                if (!std::isfinite(v))
                    contract_fail("ssm",
                                  "non-finite activation after ssm layer " + std::to_string(li));
            detail::leaky_inplace(cur, cfg.leaky_slope);
        }
        apply_fc_strip(m_->fc_pre, cur, cur_ch, nxt);
        cur.swap(nxt);
        apply_fc_strip(m_->fc_out, cur, H, nxt);
        std::vector<cd> out(len_);
        for (std::size_t t = 0; t < len_; ++t) out[t] = cd{nxt[0 * len_ + t], nxt[1 * len_ + t]};
        return out;
    }

    std::size_t len() const { return len_; }

private:
    void apply_fc_strip(const Linear& f, const std::vector<double>& x, std::size_t in_ch,
                        std::vector<double>& y) const {
        require(f.in_dim == in_ch, "ssm", "fc input width mismatch");
        y.assign(f.out_dim * len_, 0.0);
        for (std::size_t o = 0; o < f.out_dim; ++o) {
            for (std::size_t i = 0; i < f.in_dim; ++i) {
                const double w = f.w[o * f.in_dim + i];
                const double* src = x.data() + i * len_;
                double* dst = y.data() + o * len_;
                for (std::size_t t = 0; t < len_; ++t) dst[t] += w * src[t];
            }
            const double b = f.bias[o];
            double* dst = y.data() + o * len_;
            for (std::size_t t = 0; t < len_; ++t) dst[t] += b;
        }
    }

    void ssm_conv_strip(std::size_t li, std::vector<double>& x) const {
        const S4dLayer& l = m_->layers[li];
        for (std::size_t h = 0; h < l.channels; ++h) {
            std::vector<double> ch(x.begin() + h * len_, x.begin() + (h + 1) * len_);
            detail::causal_conv_inplace(kernel_ffts_[li][h], ch);
            for (std::size_t t = 0; t < len_; ++t)
                x[h * len_ + t] = ch[t] + l.d[h] * x[h * len_ + t];
        }
    }

    const TinyModel* m_;
    std::size_t len_;
    std::size_t fft_len_ = 0;
    std::vector<std::vector<std::vector<cd>>> kernel_ffts_;  // layer -> channel -> fft
};

inline std::vector<cd> tiny_forward_strip(const TinyModel& m, std::span<const cd> strip,
                                          double p_r) {
    TinyRunner runner(m, strip.size());
    return runner.forward(strip, p_r);
}

// ---------------------------------------------------------------------------
// Step-mode (recurrent) evaluation.

struct TinyState {
    std::vector<cd> s;  // n_layers * channels * state_dim
};

// Discretized coefficients are computed once; per-step cost is independent of
// the pulse index.
class TinyStepper {
public:
    explicit TinyStepper(const TinyModel& m) : m_(&m) {
        m.validate();
        for (const auto& l : m.layers) coeffs_.push_back(discretize(l));
        scratch_a_.resize(std::max<std::size_t>(m.cfg.in_dim, m.cfg.channels));
        scratch_b_.resize(std::max<std::size_t>(m.cfg.out_dim, m.cfg.channels));
    }

    TinyState zero_state() const {
        return TinyState{std::vector<cd>(m_->state_per_bin(), cd{0.0, 0.0})};
    }

    cd step(std::span<cd> state, cd z, double p_r) const {
        require(state.size() == m_->state_per_bin(), "ssm", "tiny_step: state shape mismatch");
        const TinyConfig& cfg = m_->cfg;
        const std::size_t H = cfg.channels;
        double* a = scratch_a_.data();
        double* b = scratch_b_.data();
        a[0] = z.real();
        a[1] = z.imag();
        if (cfg.in_dim > 2) a[2] = p_r;
        std::size_t in_ch = cfg.in_dim;
        std::size_t off = 0;
        for (std::size_t li = 0; li < cfg.n_layers; ++li) {
            const Linear& f = m_->fc_front[li];
            require(f.in_dim == in_ch, "ssm", "tiny_step: fc width mismatch");
            f.apply({a, in_ch}, {b, H});
            const S4dLayer& l = m_->layers[li];
            s4d_step(l, coeffs_[li], state.subspan(off, l.modes()), {b, H}, {a, H});
            off += l.modes();
            for (std::size_t h = 0; h < H; ++h)
                if (a[h] < 0.0) a[h] *= cfg.leaky_slope;
            in_ch = H;
        }
        m_->fc_pre.apply({a, H}, {b, H});
        m_->fc_out.apply({b, H}, {a, cfg.out_dim});
        return cd{a[0], a[1]};
    }

    cd step(TinyState& st, cd z, double p_r) const { return step(std::span<cd>(st.s), z, p_r); }

private:
    const TinyModel* m_;
    std::vector<DiscreteCoeffs> coeffs_;
    mutable std::vector<double> scratch_a_, scratch_b_;
};

inline cd tiny_step(const TinyModel& m, TinyState& st, cd z, double p_r) {
    TinyStepper stepper(m);
    return stepper.step(st, z, p_r);
}

// ---------------------------------------------------------------------------
// Per-range-bin recurrent state for a whole swath.
struct StateBank {
    std::size_t n_r = 0;
    std::size_t stride = 0;  // state floats per bin
    std::vector<cd> s;       // n_r * stride
    std::size_t next_pulse = 0;

    StateBank(std::size_t bins, const TinyModel& m)
        : n_r(bins), stride(m.state_per_bin()), s(bins * m.state_per_bin(), cd{0.0, 0.0}) {}

    std::size_t bytes() const { return s.size() * sizeof(cd); }
};

// Streaming engine: per pulse, range-compress, normalize, advance every
// range bin by one recurrent step, and emit the denormalized focused row.
class StreamFocuser {
public:
    StreamFocuser(const TinyModel& m, const RadarParams& params, std::size_t n_r,
                  NormalizationSpec norm = {}, std::size_t range_threads = 1)
        : model_(m),
          stepper_(m),
          bank_(n_r, m),
          norm_(norm),
          n_r_(n_r),
          threads_(range_threads == 0 ? 1 : range_threads) {
        require(fft::is_pow2(n_r), "ssm", "stream: N_r must be a power of two");
        h_r_ = rda::build_range_filter(params, n_r);
        p_r_.resize(n_r);
        for (std::size_t r = 0; r < n_r; ++r)
            p_r_[r] = (n_r == 1) ? 0.0
                                 : static_cast<double>(r) / static_cast<double>(n_r - 1);
    }

    const StateBank& bank() const { return bank_; }
    std::size_t pulses_seen() const { return bank_.next_pulse; }

    std::vector<cfloat> push(std::size_t k, std::span<const cfloat> raw_row) {
        require(k == bank_.next_pulse, "ssm",
                "stream: out-of-order pulse index " + std::to_string(k) + " (expected " +
                    std::to_string(bank_.next_pulse) + ")");
        require(raw_row.size() == n_r_, "ssm", "stream: N_r mismatch with state bank");
        std::vector<cd> rc(n_r_);
        for (std::size_t i = 0; i < n_r_; ++i)
            rc[i] = cd{raw_row[i].real(), raw_row[i].imag()};
        fft::fft_inplace(rc, false);
        for (std::size_t i = 0; i < n_r_; ++i) rc[i] *= h_r_[i];
        fft::fft_inplace(rc, true);

        std::vector<cfloat> out(n_r_);
        const double inv_scale = 1.0 / norm_.scale;
        auto run_span = [&](TinyStepper& stepper, std::size_t lo, std::size_t hi) {
            for (std::size_t r = lo; r < hi; ++r) {
                const cd z = rc[r] * inv_scale;
                const cd y = stepper.step(
                    std::span<cd>(bank_.s.data() + r * bank_.stride, bank_.stride), z, p_r_[r]);
                const cd phys = y * norm_.scale;
                out[r] = cfloat{static_cast<float>(phys.real()),
                                static_cast<float>(phys.imag())};
            }
        };
        if (threads_ <= 1) {
            run_span(stepper_, 0, n_r_);
        } else {
            // Bins are independent; each worker gets its own stepper scratch.
            std::vector<std::thread> pool;
            const std::size_t chunk = (n_r_ + threads_ - 1) / threads_;
            for (std::size_t t = 0; t < threads_; ++t) {
                const std::size_t lo = t * chunk;
                const std::size_t hi = std::min(n_r_, lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back([&run_span, this, lo, hi] {
                    TinyStepper local(model_);
                    run_span(local, lo, hi);
                });
            }
            for (auto& th : pool) th.join();
        }
        ++bank_.next_pulse;
        return out;
    }

private:
    const TinyModel& model_;
    TinyStepper stepper_;
    StateBank bank_;
    NormalizationSpec norm_;
    std::size_t n_r_;
    std::size_t threads_;
    std::vector<cd> h_r_;
    std::vector<double> p_r_;
};

// ---------------------------------------------------------------------------
// OSPM checkpoint: magic "OSPM", u32 LE header length, textual config header,
// then the flat parameter vector as f32 little-endian.

inline std::string ospm_encode(const TinyModel& m) {
    m.validate();
    std::ostringstream h;
    h << "n_layers: " << m.cfg.n_layers << "\n";
    h << "channels: " << m.cfg.channels << "\n";
    h << "state_dim: " << m.cfg.state_dim << "\n";
    h << "in_dim: " << m.cfg.in_dim << "\n";
    h << "out_dim: " << m.cfg.out_dim << "\n";
    h << "leaky_slope: " << osp::detail::fmt_double(m.cfg.leaky_slope) << "\n";
    h << "discretization: " << (m.cfg.disc == Discretization::Zoh ? "zoh" : "bilinear") << "\n";
    const std::string header = h.str();
    std::string out = "OSPM";
    osp::detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    for (double v : flatten_params(m)) osp::detail::put_f32(out, static_cast<float>(v));
    return out;
}

inline TinyModel ospm_decode(const std::string& bytes) {
    require(bytes.size() >= 8 && bytes.compare(0, 4, "OSPM") == 0, "ssm",
            "checkpoint: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t hlen = osp::detail::get_u32(p + 4);
    require(bytes.size() >= 8 + static_cast<std::size_t>(hlen), "ssm",
            "checkpoint: truncated header");
    TinyConfig cfg;
    std::istringstream hs(bytes.substr(8, hlen));
    std::string line;
    while (std::getline(hs, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        std::string val = line.substr(colon + 1);
        while (!val.empty() && val.front() == ' ') val.erase(val.begin());
        if (key == "n_layers") cfg.n_layers = std::stoull(val);
        else if (key == "channels") cfg.channels = std::stoull(val);
        else if (key == "state_dim") cfg.state_dim = std::stoull(val);
        else if (key == "in_dim") cfg.in_dim = std::stoull(val);
        else if (key == "out_dim") cfg.out_dim = std::stoull(val);
        else if (key == "leaky_slope") cfg.leaky_slope = std::stod(val);
        else if (key == "discretization")
            cfg.disc = (val == "bilinear") ? Discretization::Bilinear : Discretization::Zoh;
        else contract_fail("ssm", "checkpoint: unknown header key '" + key + "'");
    }
    TinyModel m = tiny_init(cfg, 0);
    const std::size_t n_floats = flatten_params(m).size();
    require(bytes.size() == 8 + hlen + n_floats * 4, "ssm",
            "checkpoint: parameter blob size mismatch");
    std::vector<double> v(n_floats);
    const unsigned char* d = p + 8 + hlen;
    for (std::size_t i = 0; i < n_floats; ++i)
        v[i] = static_cast<double>(osp::detail::get_f32(d + i * 4));
    unflatten_params(m, v);
    m.validate();
    return m;
}

inline void save_checkpoint(const TinyModel& m, const std::string& path) {
    const std::string bytes = ospm_encode(m);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), "ssm", "save_checkpoint: cannot open '" + path + "'");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), "ssm", "save_checkpoint: write failed");
}

inline TinyModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "ssm", "load_checkpoint: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ospm_decode(ss.str());
}

}  // namespace osp::ssm
