#pragma once

// Desk-scale student optimization: central-difference gradients over the flat
// parameter vector, Adam with linear warmup + cosine decay, gradient-norm
// clipping, accumulation over mini-batches, informativeness-weighted batch
// losses, and distillation from a frozen teacher.

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "osp/error.hpp"
#include "osp/loss.hpp"
#include "osp/sarcore.hpp"
#include "osp/ssm.hpp"

namespace osp::train {

using fft::cd;

struct TrainConfig {
    double lr = 4e-4;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t warmup_epochs = 3;
    double clip = 0.5;
    std::size_t max_epochs = 300;
    std::size_t patience = 40;
    double min_delta = 1e-5;
    std::size_t strip_len = 1000;
    std::size_t batch_strips = 61;
    std::size_t grad_accum = 2;
    std::uint64_t seed = 42;
    double fd_step = 1e-4;  // relative central-difference perturbation
    std::size_t fd_threads = 1;

    void validate() const {
        require(lr > 0 && clip > 0 && max_epochs >= 1 && strip_len >= 3 && batch_strips >= 1 &&
                    grad_accum >= 1 && fd_step > 0 && min_delta >= 0,
                "train", "invalid training config");
    }
};

enum class TeacherKind { DspOracle, SsmTeacher };

// DSP_ORACLE treats the reference azimuth-compressed strip as the teacher
// output; SSM_TEACHER runs a frozen larger model.
struct TeacherRef {
    TeacherKind kind = TeacherKind::DspOracle;
    const ssm::TinyModel* model = nullptr;  // required for SsmTeacher
};

struct StripSample {
    std::vector<cd> input;   // normalized RC strip
    std::vector<cd> target;  // normalized AZ strip
    double p_r = 0.0;
};

// Unit-stride per-range-bin azimuth strips of length cfg.strip_len, shuffled
// deterministically by cfg.seed.
inline std::vector<StripSample> strip_dataset(const Raster& rc, const Raster& az,
                                              const TrainConfig& cfg,
                                              const NormalizationSpec& norm = {}) {
    require(rc.rows == az.rows && rc.cols == az.cols, "train",
            "strip_dataset: rc/az dims differ");
    require(rc.rows >= cfg.strip_len, "train",
            "strip_dataset: raster azimuth length " + std::to_string(rc.rows) +
                " shorter than strip_len " + std::to_string(cfg.strip_len));
    const std::size_t segments = rc.rows / cfg.strip_len;
    std::vector<StripSample> out;
    out.reserve(rc.cols * segments);
    const double inv = 1.0 / norm.scale;
    for (std::size_t r = 0; r < rc.cols; ++r) {
        for (std::size_t s = 0; s < segments; ++s) {
            StripSample sm;
            sm.p_r = (rc.cols == 1) ? 0.0
                                    : static_cast<double>(r) / static_cast<double>(rc.cols - 1);
            sm.input.resize(cfg.strip_len);
            sm.target.resize(cfg.strip_len);
            for (std::size_t t = 0; t < cfg.strip_len; ++t) {
                const cfloat zi = rc.at(s * cfg.strip_len + t, r);
                const cfloat zt = az.at(s * cfg.strip_len + t, r);
                sm.input[t] = cd{zi.real() * inv, zi.imag() * inv};
                sm.target[t] = cd{zt.real() * inv, zt.imag() * inv};
            }
            out.push_back(std::move(sm));
        }
    }
    // Deterministic Fisher-Yates shuffle.
    std::uint64_t s = cfg.seed ^ 0x5DEECE66Dull;
    auto next = [&s] {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        return s;
    };
    for (std::size_t i = out.size(); i > 1; --i) {
        const std::size_t j = next() % i;
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

// Central differences with per-parameter step max(|theta_i|, 1) * fd_step.
// Coordinates are independent, so threading does not change the result.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    const std::vector<double>& theta, double fd_step, std::size_t threads = 1) {
    require(fd_step > 0, "train", "fd_gradient: step must be > 0");
    std::vector<double> grad(theta.size(), 0.0);
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> probe = theta;
        for (std::size_t i = lo; i < hi; ++i) {
            const double h = std::max(std::abs(theta[i]), 1.0) * fd_step;
            probe[i] = theta[i] + h;
            const double up = loss_fn(probe);
            probe[i] = theta[i] - h;
            const double dn = loss_fn(probe);
            probe[i] = theta[i];
            require(std::isfinite(up) && std::isfinite(dn), "train",
                    "fd_gradient: non-finite loss at coordinate " + std::to_string(i));
            grad[i] = (up - dn) / (2.0 * h);
        }
    };
    if (threads <= 1) {
        run_range(0, theta.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (theta.size() + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(theta.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return grad;
}

// Linear warmup over warmup_epochs to lr, then cosine decay to zero at
// max_epochs.
inline double lr_at(const TrainConfig& cfg, std::size_t epoch) {
    if (epoch < cfg.warmup_epochs)
        return cfg.lr * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
    const double span = static_cast<double>(cfg.max_epochs - cfg.warmup_epochs);
    const double t = (span > 0) ? static_cast<double>(epoch - cfg.warmup_epochs) / span : 0.0;
    return cfg.lr * 0.5 * (1.0 + std::cos(fft::kPi * t));
}

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0;
    double train_loss = 0;  // weighted student objective
    loss::AfBreakdown train_af;
    double val_af = 0;
};

struct TrainResult {
    ssm::TinyModel model;  // best-validation parameters
    std::vector<EpochLog> history;
    bool diverged = false;
    std::size_t stopped_epoch = 0;
    double best_val = 0;
};

namespace detail {

inline std::vector<std::vector<cd>> teacher_predictions(const TeacherRef& teacher,
                                                        const std::vector<StripSample>& data) {
    std::vector<std::vector<cd>> preds;
    preds.reserve(data.size());
    if (teacher.kind == TeacherKind::DspOracle) {
        for (const auto& s : data) preds.push_back(s.target);
        return preds;
    }
    require(teacher.model != nullptr, "train", "ssm teacher requires a model");
    if (data.empty()) return preds;
    ssm::TinyRunner runner(*teacher.model, data.front().input.size());
    for (const auto& s : data) preds.push_back(runner.forward(s.input, s.p_r));
    return preds;
}

inline double global_norm(const std::vector<double>& g) {
    double s = 0.0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
}

// Keeps every mode strictly stable after an optimizer step.
inline void project_stable(ssm::TinyModel& m) {
    for (auto& l : m.layers)
        for (auto& lam : l.lambda)
            if (lam.real() > -1e-4) lam.real(-1e-4);
}

}  // namespace detail

// Mean informativeness-weighted student loss over a batch of samples.
inline double batch_loss(const ssm::TinyModel& model, const std::vector<StripSample>& data,
                         const std::vector<std::vector<cd>>& teacher_preds,
                         std::span<const std::size_t> idx, const std::vector<double>& weights,
                         const NormalizationSpec& norm, const loss::LossWeights& w,
                         const loss::KdWeights& kw) {
    require(!idx.empty(), "train", "empty batch");
    ssm::TinyRunner runner(model, data[idx[0]].input.size());
    double total = 0.0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const StripSample& s = data[idx[b]];
        const std::vector<cd> pred = runner.forward(s.input, s.p_r);
        total += weights[b] *
                 loss::student_loss(pred, s.target, teacher_preds[idx[b]], norm, w, kw);
    }
    return total / static_cast<double>(idx.size());
}

inline double dataset_af_loss(const ssm::TinyModel& model, const std::vector<StripSample>& data,
                              const NormalizationSpec& norm, const loss::LossWeights& w,
                              loss::AfBreakdown* mean_breakdown = nullptr) {
    require(!data.empty(), "train", "empty dataset");
    ssm::TinyRunner runner(model, data.front().input.size());
    loss::AfBreakdown acc;
    for (const auto& s : data) {
        const std::vector<cd> pred = runner.forward(s.input, s.p_r);
        const loss::AfBreakdown b = loss::af_loss(loss::StripPair{pred, s.target, norm}, w);
        acc.complex_term += b.complex_term;
        acc.logamp += b.logamp;
        acc.ampcorr += b.ampcorr;
        acc.tail += b.tail;
        acc.grad += b.grad;
        acc.psd += b.psd;
        acc.focuswidth += b.focuswidth;
        acc.edge += b.edge;
        acc.total += b.total;
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    acc.complex_term *= inv;
    acc.logamp *= inv;
    acc.ampcorr *= inv;
    acc.tail *= inv;
    acc.grad *= inv;
    acc.psd *= inv;
    acc.focuswidth *= inv;
    acc.edge *= inv;
    acc.total *= inv;
    if (mean_breakdown) *mean_breakdown = acc;
    return acc.total;
}

inline TrainResult train_student(const ssm::TinyModel& student, const TeacherRef& teacher,
                                 const std::vector<StripSample>& train_data,
                                 const std::vector<StripSample>& val_data,
                                 const TrainConfig& cfg, const loss::LossWeights& w,
                                 const loss::KdWeights& kw,
                                 const NormalizationSpec& norm = {}) {
    cfg.validate();
    w.validate();
    kw.validate();
    require(!train_data.empty() && !val_data.empty(), "train", "dataset must be nonempty");

    TrainResult res;
    res.model = student;
    std::vector<double> theta = ssm::flatten_params(res.model);
    std::vector<double> m_adam(theta.size(), 0.0), v_adam(theta.size(), 0.0);
    std::size_t adam_t = 0;

    const std::vector<std::vector<cd>> teacher_preds =
        detail::teacher_predictions(teacher, train_data);

    // Fixed batch partition; informativeness weights depend only on targets,
    // so they are precomputed per mini-batch.
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < train_data.size(); start += cfg.batch_strips) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(train_data.size(), start + cfg.batch_strips);
             ++i)
            idx.push_back(i);
        batches.push_back(std::move(idx));
    }
    std::vector<std::vector<double>> batch_weights;
    for (const auto& idx : batches) {
        std::vector<std::vector<cd>> targets;
        for (std::size_t i : idx) targets.push_back(train_data[i].target);
        batch_weights.push_back(loss::informativeness_weights(targets, norm, w));
    }

    std::vector<double> best_theta = theta;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_improve = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        bool blew_up = false;
        for (std::size_t b0 = 0; b0 < batches.size() && !blew_up; b0 += cfg.grad_accum) {
            std::vector<double> grad(theta.size(), 0.0);
            std::size_t used = 0;
            for (std::size_t a = 0; a < cfg.grad_accum && b0 + a < batches.size(); ++a) {
                const auto& idx = batches[b0 + a];
                const auto& wts = batch_weights[b0 + a];
                auto loss_fn = [&](const std::vector<double>& th) {
                    ssm::TinyModel probe = res.model;
                    ssm::unflatten_params(probe, th);
                    return batch_loss(probe, train_data, teacher_preds, idx, wts, norm, w, kw);
                };
                const std::vector<double> g =
                    fd_gradient(loss_fn, theta, cfg.fd_step, cfg.fd_threads);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
                ++used;
            }
            for (auto& g : grad) g /= static_cast<double>(used);
            const double gn = detail::global_norm(grad);
            if (!std::isfinite(gn)) {
                blew_up = true;
                break;
            }
            if (gn > cfg.clip)
                for (auto& g : grad) g *= cfg.clip / gn;
            ++adam_t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m_adam[i] = cfg.beta1 * m_adam[i] + (1.0 - cfg.beta1) * grad[i];
                v_adam[i] = cfg.beta2 * v_adam[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                theta[i] -= lr * (m_adam[i] / bc1) / (std::sqrt(v_adam[i] / bc2) + cfg.adam_eps);
            }
            ssm::unflatten_params(res.model, theta);
            detail::project_stable(res.model);
            theta = ssm::flatten_params(res.model);
        }

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        double train_total = 0.0;
        if (!blew_up) {
            log.train_loss = dataset_af_loss(res.model, train_data, norm, w, &log.train_af);
            log.val_af = dataset_af_loss(res.model, val_data, norm, w);
            train_total = log.train_loss;
        }
        if (blew_up || !std::isfinite(train_total) || !std::isfinite(log.val_af)) {
            res.diverged = true;
            res.stopped_epoch = epoch;
            ssm::unflatten_params(res.model, best_theta);
            return res;
        }
        res.history.push_back(log);

        if (log.val_af < best_val - cfg.min_delta) {
            best_val = log.val_af;
            best_theta = theta;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        res.stopped_epoch = epoch;
        if (since_improve >= cfg.patience) break;
    }
    ssm::unflatten_params(res.model, best_theta);
    res.best_val = best_val;
    return res;
}

// Aggregate metrics over a strip set plus the rank-score inputs.
inline loss::Metrics eval_run(const ssm::TinyModel& model, const std::vector<StripSample>& data,
                              const NormalizationSpec& norm = {}) {
    require(!data.empty(), "train", "eval_run: empty dataset");
    ssm::TinyRunner runner(model, data.front().input.size());
    std::vector<cd> pred_all, target_all;
    for (const auto& s : data) {
        const std::vector<cd> pred = runner.forward(s.input, s.p_r);
        for (std::size_t t = 0; t < pred.size(); ++t) {
            pred_all.push_back(pred[t] * norm.scale);
            target_all.push_back(s.target[t] * norm.scale);
        }
    }
    return loss::metrics(pred_all, target_all);
}

}  // namespace osp::train
