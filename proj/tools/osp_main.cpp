// Command-line entry point for the streaming SAR toolkit: scene simulation,
// the three focusing paths, student training, gradient checking, detection,
// segmentation, cost accounting, and the framed pulse stream.

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "osp/bench.hpp"
#include "osp/config.hpp"
#include "osp/downstream.hpp"
#include "osp/loss.hpp"
#include "osp/rda.hpp"
#include "osp/sarcore.hpp"
#include "osp/simgen.hpp"
#include "osp/ssm.hpp"
#include "osp/train.hpp"

namespace {

using namespace osp;
using fft::cd;

int module_exit_code(const std::string& module) {
    if (module == "sarcore") return 10;
    if (module == "simgen") return 11;
    if (module == "rda") return 12;
    if (module == "ssm") return 13;
    if (module == "loss") return 14;
    if (module == "train") return 15;
    if (module == "downstream") return 16;
    if (module == "bench") return 17;
    if (module == "cli") return 2;
    return 1;
}

// Desk-scale defaults: spaceborne-like geometry sized so the batched pass on
// the default 1024 x 1024 scene runs in seconds.
RadarParams default_params() {
    RadarParams p;
    p.prf = 160.0;
    p.wavelength = 0.03;
    p.antenna_length = 12.0;
    p.platform_velocity = 250.0;
    p.r0 = 30000.0;
    p.range_sample_rate = 100e6;
    p.chirp_bandwidth = 50e6;
    p.chirp_duration = 2.5e-6;
    p.az_spacing = p.platform_velocity / p.prf;
    return p;
}

simgen::SceneSpec default_scene() {
    simgen::SceneSpec s;
    s.params = default_params();
    s.n_pulses = 1024;
    s.n_range_bins = 1024;
    s.clutter_mean_power = 1.0;
    s.seed = 42;
    const double bin_m = kSpeedOfLight / (2.0 * s.params.range_sample_rate);
    const double amps[] = {1600, 2400, 2000, 2800, 1200};
    for (int i = 0; i < 5; ++i) {
        simgen::PointTarget t;
        t.az_position = (160.0 + 170.0 * i) * s.params.az_spacing;
        t.range_offset = (200.0 + 140.0 * i) * bin_m;
        t.amplitude = amps[i];
        s.targets.push_back(t);
    }
    return s;
}

const std::set<std::string> kSceneKeys = {
    "prf", "wavelength", "antenna_length", "platform_velocity", "r0",
    "range_sample_rate", "chirp_bandwidth", "chirp_duration", "az_spacing",
    "n_pulses", "n_range_bins", "clutter_mean_power", "seed", "target"};

simgen::SceneSpec scene_from_kv(const config::KvFile& kv) {
    kv.check_keys(kSceneKeys, "scene");
    simgen::SceneSpec base = default_scene();
    simgen::SceneSpec s;
    s.params.prf = kv.get_double("prf", base.params.prf);
    s.params.wavelength = kv.get_double("wavelength", base.params.wavelength);
    s.params.antenna_length = kv.get_double("antenna_length", base.params.antenna_length);
    s.params.platform_velocity =
        kv.get_double("platform_velocity", base.params.platform_velocity);
    s.params.r0 = kv.get_double("r0", base.params.r0);
    s.params.range_sample_rate =
        kv.get_double("range_sample_rate", base.params.range_sample_rate);
    s.params.chirp_bandwidth = kv.get_double("chirp_bandwidth", base.params.chirp_bandwidth);
    s.params.chirp_duration = kv.get_double("chirp_duration", base.params.chirp_duration);
    s.params.az_spacing = kv.get_double("az_spacing", base.params.az_spacing);
    s.n_pulses = kv.get_u64("n_pulses", base.n_pulses);
    s.n_range_bins = kv.get_u64("n_range_bins", base.n_range_bins);
    s.clutter_mean_power = kv.get_double("clutter_mean_power", base.clutter_mean_power);
    s.seed = kv.get_u64("seed", base.seed);
    const auto targets = kv.get_all("target");
    if (kv.has("target")) {
        for (const auto& t : targets) {
            std::istringstream ts(t);
            simgen::PointTarget pt;
            char comma;
            ts >> pt.az_position >> comma >> pt.range_offset >> comma >> pt.amplitude >> comma >>
                pt.phase;
            require(!ts.fail(), "cli",
                    "scene: target must be 'az_m, range_off_m, amplitude, phase'");
            s.targets.push_back(pt);
        }
    } else {
        s.targets = base.targets;
    }
    return s;
}

const std::set<std::string> kLossKeys = {"w_c",   "w_log", "w_ac",      "w_tail",
                                         "w_grad", "w_psd", "w_fw",      "w_edge",
                                         "eps",    "psd_f_min", "psd_f_max"};

loss::LossWeights loss_from_kv(const config::KvFile& kv, const loss::LossWeights& base) {
    loss::LossWeights w = base;
    w.w_c = kv.get_double("w_c", w.w_c);
    w.w_log = kv.get_double("w_log", w.w_log);
    w.w_ac = kv.get_double("w_ac", w.w_ac);
    w.w_tail = kv.get_double("w_tail", w.w_tail);
    w.w_grad = kv.get_double("w_grad", w.w_grad);
    w.w_psd = kv.get_double("w_psd", w.w_psd);
    w.w_fw = kv.get_double("w_fw", w.w_fw);
    w.w_edge = kv.get_double("w_edge", w.w_edge);
    w.eps = kv.get_double("eps", w.eps);
    w.psd_f_min = kv.get_double("psd_f_min", w.psd_f_min);
    w.psd_f_max = kv.get_double("psd_f_max", w.psd_f_max);
    return w;
}

const std::set<std::string> kKdKeys = {"lambda_kd", "alpha_c", "alpha_l",
                                       "alpha_rho", "alpha_phi", "eps_phi", "p_phi"};

loss::KdWeights kd_from_kv(const config::KvFile& kv) {
    loss::KdWeights k;
    k.lambda_kd = kv.get_double("lambda_kd", k.lambda_kd);
    k.alpha_c = kv.get_double("alpha_c", k.alpha_c);
    k.alpha_l = kv.get_double("alpha_l", k.alpha_l);
    k.alpha_rho = kv.get_double("alpha_rho", k.alpha_rho);
    k.alpha_phi = kv.get_double("alpha_phi", k.alpha_phi);
    k.eps_phi = kv.get_double("eps_phi", k.eps_phi);
    k.p_phi = kv.get_double("p_phi", k.p_phi);
    return k;
}

config::KvFile load_config_with_overrides(const std::string& path,
                                          const std::vector<std::string>& overrides) {
    config::KvFile kv;
    if (!path.empty()) kv = config::load_kv(path);
    config::apply_overrides(kv, overrides);
    return kv;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    require(static_cast<bool>(f), "cli", "cannot open '" + path + "' for writing");
    f << text;
    require(static_cast<bool>(f), "cli", "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Byte streams for the pulse-frame protocol (file, stdio, or TCP).

class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual bool read_exact(unsigned char* dst, std::size_t n) = 0;  // false on clean EOF
    virtual void write_all(const unsigned char* src, std::size_t n) = 0;
};

class StdioStream : public ByteStream {
public:
    StdioStream(std::istream* in, std::ostream* out) : in_(in), out_(out) {}
    bool read_exact(unsigned char* dst, std::size_t n) override {
        require(in_ != nullptr, "cli", "stream not opened for reading");
        in_->read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in_->gcount() == 0 && in_->eof()) return false;
        require(static_cast<std::size_t>(in_->gcount()) == n, "sarcore",
                "pulse stream truncated mid-frame");
        return true;
    }
    void write_all(const unsigned char* src, std::size_t n) override {
        require(out_ != nullptr, "cli", "stream not opened for writing");
        out_->write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
        require(static_cast<bool>(*out_), "cli", "stream write failed");
    }

private:
    std::istream* in_;
    std::ostream* out_;
};

class FdStream : public ByteStream {
public:
    explicit FdStream(int fd) : fd_(fd) {}
    ~FdStream() override {
        if (fd_ >= 0) ::close(fd_);
    }
    bool read_exact(unsigned char* dst, std::size_t n) override {
        std::size_t got = 0;
        while (got < n) {
            const ssize_t r = ::read(fd_, dst + got, n - got);
            if (r == 0) {
                require(got == 0, "sarcore", "pulse stream truncated mid-frame");
                return false;
            }
            require(r > 0, "cli", "socket read failed");
            got += static_cast<std::size_t>(r);
        }
        return true;
    }
    void write_all(const unsigned char* src, std::size_t n) override {
        std::size_t put = 0;
        while (put < n) {
            const ssize_t w = ::write(fd_, src + put, n - put);
            require(w > 0, "cli", "socket write failed");
            put += static_cast<std::size_t>(w);
        }
    }

private:
    int fd_;
};

int tcp_listen_accept(int port) {
    const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
    require(srv >= 0, "cli", "socket() failed");
    const int one = 1;
    ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    require(::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0, "cli",
            "bind() failed on port " + std::to_string(port));
    require(::listen(srv, 1) == 0, "cli", "listen() failed");
    const int cli = ::accept(srv, nullptr, nullptr);
    ::close(srv);
    require(cli >= 0, "cli", "accept() failed");
    return cli;
}

int tcp_connect(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    require(::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) == 0, "cli",
            "cannot resolve host '" + host + "'");
    int fd = -1;
    for (addrinfo* p = res; p; p = p->ai_next) {
        fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    require(fd >= 0, "cli", "cannot connect to " + host + ":" + std::to_string(port));
    return fd;
}

bool read_frame(ByteStream& in, PulseFrame& frame) {
    unsigned char head[10];
    if (!in.read_exact(head, 10)) return false;
    require(osp::detail::get_u16(head) == kFrameMagic, "sarcore", "pulse frame: bad magic");
    const std::uint32_t n = osp::detail::get_u32(head + 6);
    require(n >= 1, "sarcore", "pulse frame: zero-length row");
    std::vector<unsigned char> rest(static_cast<std::size_t>(n) * 8 + 4);
    require(in.read_exact(rest.data(), rest.size()), "sarcore",
            "pulse stream truncated mid-frame");
    std::vector<unsigned char> whole(10 + rest.size());
    std::memcpy(whole.data(), head, 10);
    std::memcpy(whole.data() + 10, rest.data(), rest.size());
    frame = decode_pulse_frame(whole);
    return true;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_path) {
    const config::KvFile kv = load_config_with_overrides(config_path, overrides);
    simgen::SceneSpec spec = scene_from_kv(kv);
    Raster raw = simgen::synth_raw(spec);
    raw.params = spec.params;
    write_raster(raw, out_path);
    std::cout << "simulate: " << raw.rows << " x " << raw.cols << " raw scene, "
              << spec.targets.size() << " targets, clutter " << spec.clutter_mean_power
              << " -> " << out_path << "\n";
    return 0;
}

int cmd_focus(const std::string& in_path, const std::string& method,
              const std::string& out_path, const std::string& pgm_path,
              const std::string& model_path, std::size_t n_b, std::size_t range_threads) {
    Raster raw = read_raster(in_path);
    require(raw.params.has_value(), "cli", "focus: input raster carries no radar params");
    const RadarParams p = *raw.params;
    Raster out;
    if (method == "rda") {
        rda::RdaFilters f = rda::build_filters(p, raw.rows, raw.cols);
        out = rda::focus_batched(raw, f);
    } else if (method == "linewise") {
        rda::LinewiseFocuser lw(p, raw.cols, n_b);
        out = Raster(raw.rows, raw.cols, Stage::AZ);
        out.params = raw.params;
        std::size_t partial = 0;
        auto sink = [&](const rda::FocusedRow& fr) {
            if (fr.partial) ++partial;
            std::copy(fr.data.begin(), fr.data.end(), out.row(fr.index).begin());
        };
        for (std::size_t k = 0; k < raw.rows; ++k)
            for (const auto& fr : lw.push(k, raw.row(k))) sink(fr);
        for (const auto& fr : lw.finish()) sink(fr);
        std::cout << "focus: linewise N_b=" << lw.buffer_len() << " delay=" << lw.delay_rows()
                  << " rows, " << partial << " edge rows partially focused\n";
    } else if (method == "osp") {
        require(!model_path.empty(), "cli", "focus --method osp requires --model");
        const ssm::TinyModel model = ssm::load_checkpoint(model_path);
        ssm::StreamFocuser sf(model, p, raw.cols, NormalizationSpec{}, range_threads);
        out = Raster(raw.rows, raw.cols, Stage::AZ);
        out.params = raw.params;
        for (std::size_t k = 0; k < raw.rows; ++k) {
            const std::vector<cfloat> row = sf.push(k, raw.row(k));
            std::copy(row.begin(), row.end(), out.row(k).begin());
        }
    } else {
        contract_fail("cli", "focus: unknown method '" + method + "'");
    }
    write_raster(out, out_path);
    if (!pgm_path.empty()) write_pgm16(to_image(out, ImageMode::Db), pgm_path);
    std::cout << "focus: " << method << " -> " << out_path << "\n";
    return 0;
}

const std::set<std::string> kTrainKeys = {
    "lr", "warmup_epochs", "max_epochs", "patience", "min_delta", "strip_len",
    "batch_strips", "grad_accum", "seed", "fd_step", "fd_threads", "clip",
    "val_fraction",
    "w_c", "w_log", "w_ac", "w_tail", "w_grad", "w_psd", "w_fw", "w_edge", "eps",
    "psd_f_min", "psd_f_max",
    "lambda_kd", "alpha_c", "alpha_l", "alpha_rho", "alpha_phi", "eps_phi", "p_phi"};

int cmd_train(const std::string& rc_path, const std::string& az_path,
              const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_model, const std::string& history_path,
              const std::string& teacher_path) {
    const config::KvFile kv = load_config_with_overrides(config_path, overrides);
    kv.check_keys(kTrainKeys, "train");
    train::TrainConfig cfg;
    cfg.lr = kv.get_double("lr", cfg.lr);
    cfg.warmup_epochs = kv.get_u64("warmup_epochs", cfg.warmup_epochs);
    cfg.max_epochs = kv.get_u64("max_epochs", cfg.max_epochs);
    cfg.patience = kv.get_u64("patience", cfg.patience);
    cfg.min_delta = kv.get_double("min_delta", cfg.min_delta);
    cfg.strip_len = kv.get_u64("strip_len", cfg.strip_len);
    cfg.batch_strips = kv.get_u64("batch_strips", cfg.batch_strips);
    cfg.grad_accum = kv.get_u64("grad_accum", cfg.grad_accum);
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.fd_step = kv.get_double("fd_step", cfg.fd_step);
    cfg.fd_threads = kv.get_u64("fd_threads", cfg.fd_threads);
    cfg.clip = kv.get_double("clip", cfg.clip);
    const double val_fraction = kv.get_double("val_fraction", 0.25);
    const loss::LossWeights w = loss_from_kv(kv, loss::LossWeights::student());
    const loss::KdWeights kd = kd_from_kv(kv);

    const Raster rc = read_raster(rc_path);
    const Raster az = read_raster(az_path);
    std::vector<train::StripSample> all = train::strip_dataset(rc, az, cfg);
    require(all.size() >= 2, "train", "need at least two strips");
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           val_fraction * all.size()));
    std::vector<train::StripSample> val(all.end() - n_val, all.end());
    all.resize(all.size() - n_val);

    ssm::TinyModel student = ssm::tiny_init(ssm::TinyConfig{}, cfg.seed);
    const auto pc = student.param_count();
    std::cout << "train: student has " << pc.floats << " trainable scalars (" << pc.entries
              << " entries counting complex pairs once; published model card says ~200)\n";

    ssm::TinyModel teacher_model;
    train::TeacherRef teacher;
    if (!teacher_path.empty()) {
        teacher_model = ssm::load_checkpoint(teacher_path);
        teacher.kind = train::TeacherKind::SsmTeacher;
        teacher.model = &teacher_model;
    }
    const train::TrainResult res =
        train::train_student(student, teacher, all, val, cfg, w, kd);
    ssm::save_checkpoint(res.model, out_model);

    std::ostringstream csv;
    csv << "epoch,lr,train_af,val_af,complex,logamp,ampcorr,tail,grad,psd,focuswidth,edge\n";
    for (const auto& e : res.history) {
        csv << e.epoch << "," << e.lr << "," << e.train_loss << "," << e.val_af << ","
            << e.train_af.complex_term << "," << e.train_af.logamp << "," << e.train_af.ampcorr
            << "," << e.train_af.tail << "," << e.train_af.grad << "," << e.train_af.psd << ","
            << e.train_af.focuswidth << "," << e.train_af.edge << "\n";
    }
    if (!history_path.empty()) write_text(history_path, csv.str());
    std::cout << "train: " << res.history.size() << " epochs, best val af_loss " << res.best_val
              << (res.diverged ? " (diverged, restored last good checkpoint)" : "") << " -> "
              << out_model << "\n";
    return res.diverged ? module_exit_code("train") : 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t len, std::size_t n_coords,
                  const std::string& out_path) {
    ssm::TinyModel model = ssm::tiny_init(ssm::TinyConfig{}, seed);
    std::vector<cd> input(len), target(len);
    std::uint64_t s = seed ^ 0x1234567ull;
    auto rnd = [&s] {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        return static_cast<double>(s >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    };
    for (std::size_t i = 0; i < len; ++i) {
        input[i] = cd{rnd(), rnd()};
        target[i] = cd{rnd(), rnd()};
    }
    loss::LossWeights w = loss::LossWeights::student();
    w.w_fw = 0.0;  // piecewise-constant term has no meaningful local gradient
    const NormalizationSpec norm;
    auto loss_of = [&](const std::vector<double>& th) {
        ssm::TinyModel probe = model;
        ssm::unflatten_params(probe, th);
        const std::vector<cd> pred = ssm::tiny_forward_strip(probe, input, 0.5);
        return loss::af_loss(loss::StripPair{pred, target, norm}, w).total;
    };
    const std::vector<double> theta = ssm::flatten_params(model);
    std::uint64_t pick = seed * 2654435761ull + 1;
    std::ostringstream csv;
    csv << "coord,central2,stencil4,rel_err\n";
    double worst = 0.0;
    for (std::size_t c = 0; c < n_coords; ++c) {
        pick ^= pick << 13;
        pick ^= pick >> 7;
        pick ^= pick << 17;
        const std::size_t i = pick % theta.size();
        const double h = std::max(std::abs(theta[i]), 1.0) * 1e-4;
        std::vector<double> probe = theta;
        auto at = [&](double delta) {
            probe[i] = theta[i] + delta;
            const double v = loss_of(probe);
            probe[i] = theta[i];
            return v;
        };
        const double central = (at(h) - at(-h)) / (2.0 * h);
        const double stencil =
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
        const double rel = std::abs(central - stencil) /
                           std::max(std::abs(stencil), 1e-12);
        worst = std::max(worst, rel);
        csv << i << "," << central << "," << stencil << "," << rel << "\n";
    }
    if (!out_path.empty()) write_text(out_path, csv.str());
    else std::cout << csv.str();
    std::cout << "gradcheck: " << n_coords << " coordinates, worst rel err " << worst << "\n";
    return worst < 1e-3 ? 0 : module_exit_code("train");
}

int cmd_detect(const std::string& in_path, const std::string& csv_path,
               const std::string& pgm_path, const std::vector<std::string>& overrides) {
    config::KvFile kv;
    config::apply_overrides(kv, overrides);
    kv.check_keys({"guard_half", "train_half", "p_fa", "min_component"}, "detect");
    downstream::CfarConfig cfg;
    cfg.guard_half = static_cast<int>(kv.get_u64("guard_half", cfg.guard_half));
    cfg.train_half = static_cast<int>(kv.get_u64("train_half", cfg.train_half));
    cfg.p_fa = kv.get_double("p_fa", cfg.p_fa);
    cfg.min_component = static_cast<int>(kv.get_u64("min_component", cfg.min_component));

    const Raster img = read_raster(in_path);
    downstream::CfarStream stream(cfg, img.cols);
    downstream::Mask mask(img.rows, img.cols);
    std::vector<downstream::Detection> hits;
    auto sink = [&](const downstream::CfarRow& r) {
        std::copy(r.mask.begin(), r.mask.end(), mask.m.begin() + r.index * img.cols);
        hits.insert(hits.end(), r.hits.begin(), r.hits.end());
    };
    for (std::size_t k = 0; k < img.rows; ++k)
        for (const auto& r : stream.push(k, img.row(k))) sink(r);
    for (const auto& r : stream.finish()) sink(r);
    const downstream::Mask cleaned =
        downstream::remove_small_components(mask, cfg.min_component, 8);

    std::ostringstream csv;
    csv << "row,col,intensity,threshold\n";
    for (const auto& h : hits)
        if (cleaned.at(h.row, h.col)) {
            csv << h.row << "," << h.col << "," << h.intensity << "," << h.threshold << "\n";
        }
    write_text(csv_path, csv.str());
    if (!pgm_path.empty()) write_pgm16(downstream::mask_to_image(cleaned), pgm_path);
    std::size_t kept = 0;
    for (auto v : cleaned.m) kept += v;
    std::cout << "detect: alpha=" << stream.alpha() << " latency=" << stream.latency_rows()
              << " rows, " << kept << " detection pixels -> " << csv_path << "\n";
    return 0;
}

int cmd_segment(const std::string& in_path, const std::string& pgm_path,
                const std::string& rle_path, const std::vector<std::string>& overrides) {
    config::KvFile kv;
    config::apply_overrides(kv, overrides);
    kv.check_keys({"kernel", "tau_db", "a_min", "connectivity"}, "segment");
    downstream::SegConfig cfg;
    cfg.kernel = static_cast<int>(kv.get_u64("kernel", cfg.kernel));
    cfg.tau_db = kv.get_double("tau_db", cfg.tau_db);
    cfg.a_min = kv.get_u64("a_min", cfg.a_min);
    cfg.connectivity = static_cast<int>(kv.get_u64("connectivity", cfg.connectivity));
    const Raster img = read_raster(in_path);
    const downstream::Mask mask = downstream::water_mask(img, cfg);
    write_pgm16(downstream::mask_to_image(mask), pgm_path);
    if (!rle_path.empty()) write_text(rle_path, downstream::mask_to_rle(mask));
    std::size_t water = 0;
    for (auto v : mask.m) water += v;
    std::cout << "segment: " << water << " water pixels (" << mask.rows << "x" << mask.cols
              << ") -> " << pgm_path << "\n";
    return 0;
}

std::string fmt_bytes(double bytes) {
    std::ostringstream os;
    if (bytes >= 1e9) os << bytes / 1e9 << " GB";
    else if (bytes >= 1e6) os << bytes / 1e6 << " MB";
    else if (bytes >= 1e3) os << bytes / 1e3 << " KB";
    else os << bytes << " B";
    return os.str();
}

void print_flop_table(const bench::FlopTable& t, std::ostream& os) {
    os << t.title << " [" << t.unit << "]\n";
    for (const auto& r : t.rows) {
        os << "  " << r.op << " | " << r.expr << " | paper " << r.paper << " | strict "
           << r.strict << (r.slip ? "  (paper value off-convention)" : "") << "\n";
    }
    os << "  total: paper " << t.paper_total << ", strict " << t.strict_total
       << "; per scan: paper " << t.paper_per_scan << ", strict " << t.strict_per_scan << "\n";
    for (const auto& n : t.notes) os << "  note: " << n << "\n";
}

int cmd_bench(bool paper_point, const std::string& measure_path, const std::string& csv_path,
              const std::string& model_path, std::size_t max_rows) {
    std::ostringstream csv;
    csv << "method,complexity_ops,per_row_ms_median,per_row_ms_p95,full_ms,model_bytes,"
           "peak_rss_bytes,buffer_delay_rows\n";
    if (paper_point) {
        const bench::CostModel batched{bench::Method::RdaBatched, 20000, 20000, 0, 0};
        const bench::CostModel linewise{bench::Method::RdaLinewise, 20000, 20000, 972, 0};
        const bench::CostModel osp{bench::Method::Osp, 20000, 20000, 0, 330};
        std::cout << "Complexity totals at 20,000 x 20,000 (complex ops):\n";
        std::cout << "  batched  " << bench::complexity_count(batched) << "\n";
        std::cout << "  linewise " << bench::complexity_count(linewise) << " (N_b=972)\n";
        std::cout << "  osp      " << bench::complexity_count(osp) << " (X=330 MACs)\n";
        std::cout << "  note: the per-stage RCMC row is published as 3*Na*Nr while the "
                     "batched total counts each multiply once\n\n";
        print_flop_table(bench::paper_flops_batched(), std::cout);
        std::cout << "\n";
        print_flop_table(bench::paper_flops_linewise(), std::cout);
        std::cout << "\n";
        print_flop_table(bench::paper_flops_osp(), std::cout);
        std::cout << "\nMemory models:\n";
        for (const auto& mb : {bench::memory_batched(20000, 20000),
                               bench::memory_linewise(972, 20000),
                               bench::memory_osp_paper_point()}) {
            std::cout << "  " << mb.title << ": " << fmt_bytes(mb.total_bytes) << "\n";
            for (const auto& it : mb.items)
                std::cout << "    " << it.label << ": " << fmt_bytes(it.bytes) << "\n";
        }
    }
    if (!measure_path.empty()) {
        const Raster raw = read_raster(measure_path);
        require(raw.params.has_value(), "cli", "bench: raster carries no radar params");
        const RadarParams p = *raw.params;
        std::cout << "\nMeasured on " << raw.rows << " x " << raw.cols << " scene (single "
                  << "stream, one thread):\n";

        {
            const auto t0 = std::chrono::steady_clock::now();
            rda::RdaFilters f = rda::build_filters(p, raw.rows, raw.cols);
            const Raster az = rda::focus_batched(raw, f);
            const auto t1 = std::chrono::steady_clock::now();
            const double full_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            (void)az;
            const auto mem = bench::memory_batched(static_cast<double>(raw.rows),
                                                   static_cast<double>(raw.cols));
            std::cout << "  rda-batched: full " << full_ms << " ms, model memory "
                      << fmt_bytes(mem.total_bytes) << ", peak rss "
                      << fmt_bytes(static_cast<double>(bench::peak_rss_bytes())) << "\n";
            csv << "rda-batched,"
                << bench::complexity_count({bench::Method::RdaBatched,
                                            static_cast<double>(raw.rows),
                                            static_cast<double>(raw.cols), 0, 0})
                << ",,," << full_ms << "," << mem.total_bytes << "," << bench::peak_rss_bytes()
                << ",\n";
        }
        {
            rda::LinewiseFocuser lw(p, raw.cols);
            const std::size_t rows =
                (max_rows == 0) ? std::min(raw.rows, lw.buffer_len() + 160) : max_rows;
            const auto rep = bench::measure_rows(
                raw, [&lw](std::size_t k, std::span<const cfloat> row) { lw.push(k, row); },
                lw.buffer_len() + 8, rows);
            const auto mem = bench::memory_linewise(static_cast<double>(lw.buffer_len()),
                                                    static_cast<double>(raw.cols));
            std::cout << "  rda-linewise: median " << rep.median_row_ms << " ms/row, p95 "
                      << rep.p95_row_ms << " ms/row over " << rep.rows_timed
                      << " warm rows, buffering delay " << lw.delay_rows()
                      << " pulses, model memory " << fmt_bytes(mem.total_bytes) << "\n";
            csv << "rda-linewise,"
                << bench::complexity_count({bench::Method::RdaLinewise,
                                            static_cast<double>(raw.rows),
                                            static_cast<double>(raw.cols),
                                            static_cast<double>(lw.buffer_len()), 0})
                << "," << rep.median_row_ms << "," << rep.p95_row_ms << "," << rep.full_ms << ","
                << mem.total_bytes << "," << rep.peak_rss << "," << lw.delay_rows() << "\n";
        }
        {
            ssm::TinyModel model = model_path.empty()
                                       ? ssm::tiny_init(ssm::TinyConfig{}, 42)
                                       : ssm::load_checkpoint(model_path);
            ssm::StreamFocuser sf(model, p, raw.cols);
            const auto rep = bench::measure_rows(
                raw, [&sf](std::size_t k, std::span<const cfloat> row) { sf.push(k, row); }, 8,
                max_rows);
            const auto mem = bench::memory_osp(raw.cols, model);
            std::cout << "  osp: median " << rep.median_row_ms << " ms/row, p95 "
                      << rep.p95_row_ms << " ms/row over " << rep.rows_timed
                      << " warm rows, zero buffering delay, model memory "
                      << fmt_bytes(mem.total_bytes) << "\n";
            csv << "osp,"
                << bench::complexity_count({bench::Method::Osp, static_cast<double>(raw.rows),
                                            static_cast<double>(raw.cols), 0,
                                            bench::tiny_step_flops(model.cfg) / 2.0})
                << "," << rep.median_row_ms << "," << rep.p95_row_ms << "," << rep.full_ms << ","
                << mem.total_bytes << "," << rep.peak_rss << ",0\n";
        }
    }
    if (!csv_path.empty()) write_text(csv_path, csv.str());
    return 0;
}

int cmd_stream_serve(const std::string& in_path, const std::string& out_path, double pace,
                     int listen_port) {
    const Raster raw = read_raster(in_path);
    require(raw.params.has_value() || pace == 0.0, "cli",
            "stream-serve: pacing needs radar params in the raster");
    std::ofstream file_out;
    std::unique_ptr<ByteStream> out;
    if (listen_port > 0) {
        out = std::make_unique<FdStream>(tcp_listen_accept(listen_port));
    } else if (out_path.empty() || out_path == "-") {
        out = std::make_unique<StdioStream>(nullptr, &std::cout);
    } else {
        file_out.open(out_path, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(file_out), "cli", "cannot open '" + out_path + "'");
        out = std::make_unique<StdioStream>(nullptr, &file_out);
    }
    const double interval_s = (pace > 0.0) ? pace / raw.params->prf : 0.0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < raw.rows; ++k) {
        if (interval_s > 0.0) {
            const auto due = start + std::chrono::duration<double>(interval_s *
                                                                   static_cast<double>(k));
            std::this_thread::sleep_until(due);
        }
        const std::string frame = encode_pulse_frame(raw.row(k), static_cast<std::uint32_t>(k));
        out->write_all(reinterpret_cast<const unsigned char*>(frame.data()), frame.size());
    }
    std::cerr << "stream-serve: " << raw.rows << " frames sent\n";
    return 0;
}

int cmd_stream_focus(const std::string& in_path, const std::string& connect_spec,
                     const std::string& model_path, const std::string& out_path,
                     const std::string& log_path, const std::string& sarb_out,
                     std::size_t range_threads) {
    std::ifstream file_in;
    std::unique_ptr<ByteStream> in;
    if (!connect_spec.empty()) {
        const auto colon = connect_spec.find(':');
        require(colon != std::string::npos, "cli", "--connect expects host:port");
        in = std::make_unique<FdStream>(tcp_connect(connect_spec.substr(0, colon),
                                                    std::stoi(connect_spec.substr(colon + 1))));
    } else if (in_path.empty() || in_path == "-") {
        in = std::make_unique<StdioStream>(&std::cin, nullptr);
    } else {
        file_in.open(in_path, std::ios::binary);
        require(static_cast<bool>(file_in), "cli", "cannot open '" + in_path + "'");
        in = std::make_unique<StdioStream>(&file_in, nullptr);
    }
    std::ofstream file_out;
    std::unique_ptr<ByteStream> out;
    if (out_path.empty() || out_path == "-") {
        out = std::make_unique<StdioStream>(nullptr, &std::cout);
    } else {
        file_out.open(out_path, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(file_out), "cli", "cannot open '" + out_path + "'");
        out = std::make_unique<StdioStream>(nullptr, &file_out);
    }
    const ssm::TinyModel model =
        model_path.empty() ? ssm::tiny_init(ssm::TinyConfig{}, 42)
                           : ssm::load_checkpoint(model_path);
    const RadarParams p = default_params();

    std::optional<ssm::StreamFocuser> focuser;
    std::vector<std::vector<cfloat>> collected;
    std::ostringstream log;
    log << "k,ingest_ns,emit_ns\n";
    const auto t0 = std::chrono::steady_clock::now();
    PulseFrame frame;
    std::size_t n_rows = 0, n_r = 0;
    const bool collect = !sarb_out.empty();
    while (read_frame(*in, frame)) {
        const auto t_in = std::chrono::steady_clock::now();
        if (!focuser) {
            n_r = frame.row.size();
            focuser.emplace(model, p, n_r, NormalizationSpec{}, range_threads);
        }
        const std::vector<cfloat> focused = focuser->push(frame.k, frame.row);
        const std::string bytes = encode_pulse_frame(focused, frame.k);
        out->write_all(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
        const auto t_out = std::chrono::steady_clock::now();
        log << frame.k << ","
            << std::chrono::duration_cast<std::chrono::nanoseconds>(t_in - t0).count() << ","
            << std::chrono::duration_cast<std::chrono::nanoseconds>(t_out - t0).count() << "\n";
        if (collect) collected.push_back(focused);
        ++n_rows;
    }
    if (!log_path.empty()) write_text(log_path, log.str());
    if (collect && n_rows > 0) {
        Raster az(n_rows, n_r, Stage::AZ);
        az.params = p;
        for (std::size_t k = 0; k < n_rows; ++k)
            std::copy(collected[k].begin(), collected[k].end(), az.row(k).begin());
        write_raster(az, sarb_out);
    }
    std::cerr << "stream-focus: " << n_rows << " rows focused\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming SAR image-formation toolkit"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path, pgm_path, model_path, csv_path, rle_path;
    std::string rc_path, az_path, history_path, teacher_path, log_path, connect_spec, sarb_out;
    std::string method = "rda";
    std::vector<std::string> overrides;
    std::size_t n_b = 0, range_threads = 1, max_rows = 0;
    std::uint64_t seed = 42;
    std::size_t len = 256, n_coords = 20;
    double pace = 1.0;
    int listen_port = 0;
    bool paper_point = false;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic raw phase history");
    sim->add_option("--config", config_path, "scene key:value config");
    sim->add_option("--set", overrides, "override key=value");
    sim->add_option("--out", out_path, "output SARB path")->required();

    auto* foc = app.add_subcommand("focus", "Focus a raw SARB scene");
    foc->add_option("--in", in_path)->required();
    foc->add_option("--method", method, "rda | linewise | osp");
    foc->add_option("--out", out_path)->required();
    foc->add_option("--pgm", pgm_path, "also export a dB PGM");
    foc->add_option("--model", model_path, "OSPM checkpoint for --method osp");
    foc->add_option("--nb", n_b, "linewise buffer override");
    foc->add_option("--range-threads", range_threads);

    auto* tr = app.add_subcommand("train", "Train the tiny student on RC->AZ strips");
    tr->add_option("--rc", rc_path)->required();
    tr->add_option("--az", az_path)->required();
    tr->add_option("--config", config_path);
    tr->add_option("--set", overrides);
    tr->add_option("--out", out_path)->required();
    tr->add_option("--history", history_path);
    tr->add_option("--teacher", teacher_path, "OSPM teacher checkpoint (default: DSP oracle)");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient report");
    gc->add_option("--seed", seed);
    gc->add_option("--len", len);
    gc->add_option("--coords", n_coords);
    gc->add_option("--out", out_path);

    auto* det = app.add_subcommand("detect", "Streaming CA-CFAR vessel detection");
    det->add_option("--in", in_path)->required();
    det->add_option("--csv", csv_path)->required();
    det->add_option("--pgm", pgm_path);
    det->add_option("--set", overrides);

    auto* seg = app.add_subcommand("segment", "Threshold flood segmentation");
    seg->add_option("--in", in_path)->required();
    seg->add_option("--pgm", pgm_path)->required();
    seg->add_option("--rle", rle_path);
    seg->add_option("--set", overrides);

    auto* ben = app.add_subcommand("bench", "Cost models and measurements");
    ben->add_flag("--paper-point", paper_point, "print the published 20k x 20k tables");
    ben->add_option("--measure", in_path, "SARB scene to measure on");
    ben->add_option("--csv", csv_path);
    ben->add_option("--model", model_path);
    ben->add_option("--max-rows", max_rows);

    auto* serve = app.add_subcommand("stream-serve", "Emit pulse frames from a raw SARB");
    serve->add_option("--in", in_path)->required();
    serve->add_option("--out", out_path, "file path or - for stdout");
    serve->add_option("--pace", pace, "multiple of real-time PRF pacing; 0 = unpaced");
    serve->add_option("--listen", listen_port, "serve one TCP client on this port");

    auto* sfoc = app.add_subcommand("stream-focus", "Consume pulse frames, emit focused rows");
    sfoc->add_option("--in", in_path, "file path or - for stdin");
    sfoc->add_option("--connect", connect_spec, "host:port to pull frames from");
    sfoc->add_option("--model", model_path, "OSPM checkpoint");
    sfoc->add_option("--out", out_path, "focused-row frames: file path or - for stdout");
    sfoc->add_option("--log", log_path, "per-row ingest/emit timestamp CSV");
    sfoc->add_option("--sarb-out", sarb_out, "also assemble the focused raster");
    sfoc->add_option("--range-threads", range_threads);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, overrides, out_path);
        if (foc->parsed())
            return cmd_focus(in_path, method, out_path, pgm_path, model_path, n_b,
                             range_threads);
        if (tr->parsed())
            return cmd_train(rc_path, az_path, config_path, overrides, out_path, history_path,
                             teacher_path);
        if (gc->parsed()) return cmd_gradcheck(seed, len, n_coords, out_path);
        if (det->parsed()) return cmd_detect(in_path, csv_path, pgm_path, overrides);
        if (seg->parsed()) return cmd_segment(in_path, pgm_path, rle_path, overrides);
        if (ben->parsed())
            return cmd_bench(paper_point, in_path, csv_path, model_path, max_rows);
        if (serve->parsed()) return cmd_stream_serve(in_path, out_path, pace, listen_port);
        if (sfoc->parsed())
            return cmd_stream_focus(in_path, connect_spec, model_path, out_path, log_path,
                                    sarb_out, range_threads);
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return module_exit_code(e.module());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
