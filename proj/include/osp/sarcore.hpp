#pragma once

// Core domain types shared by the whole pipeline: complex rasters, radar
// parameters, origin-preserving normalization, SARB raster files, 16-bit PGM
// export, and the framed pulse stream.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "osp/error.hpp"

namespace osp {

using cfloat = std::complex<float>;
using cdouble = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kDbEps = 1e-12;               // inside 10*log10(|z|^2 + eps)

enum class Stage : std::uint8_t { RAW = 0, RC = 1, RCMC = 2, AZ = 3 };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::RAW: return "raw";
        case Stage::RC: return "rc";
        case Stage::RCMC: return "rcmc";
        case Stage::AZ: return "az";
    }
    return "?";
}

inline Stage stage_from_name(const std::string& s) {
    if (s == "raw") return Stage::RAW;
    if (s == "rc") return Stage::RC;
    if (s == "rcmc") return Stage::RCMC;
    if (s == "az") return Stage::AZ;
    contract_fail("sarcore", "unknown raster stage '" + s + "'");
}

struct RadarParams {
    double prf = 0.0;                // Hz
    double wavelength = 0.0;         // m
    double antenna_length = 0.0;     // m
    double platform_velocity = 0.0;  // m/s
    double r0 = 0.0;                 // m, closest-approach slant range of bin 0
    double range_sample_rate = 0.0;  // Hz
    double chirp_bandwidth = 0.0;    // Hz
    double chirp_duration = 0.0;     // s
    double az_spacing = 0.0;         // m

    void validate(std::size_t n_range_bins = 0) const {
        auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
        require(pos(prf) && pos(wavelength) && pos(antenna_length) && pos(platform_velocity) &&
                    pos(r0) && pos(range_sample_rate) && pos(chirp_bandwidth) &&
                    pos(chirp_duration) && pos(az_spacing),
                "sarcore", "radar params must all be strictly positive and finite");
        if (n_range_bins > 0) {
            require(chirp_duration * range_sample_rate <= static_cast<double>(n_range_bins),
                    "sarcore", "chirp_duration * range_sample_rate exceeds range bin count");
        }
    }
};

// Row-major complex raster indexed (azimuth pulse k, range bin r).
struct Raster {
    std::size_t rows = 0;  // azimuth, N_a
    std::size_t cols = 0;  // range, N_r
    Stage stage = Stage::RAW;
    std::vector<cfloat> data;
    std::optional<RadarParams> params;

    Raster() = default;
    Raster(std::size_t r, std::size_t c, Stage s)
        : rows(r), cols(c), stage(s), data(r * c, cfloat{0.0f, 0.0f}) {
        require(r >= 1 && c >= 1, "sarcore", "raster dims must be >= 1");
    }

    cfloat& at(std::size_t k, std::size_t r) { return data[k * cols + r]; }
    const cfloat& at(std::size_t k, std::size_t r) const { return data[k * cols + r]; }
    std::span<const cfloat> row(std::size_t k) const { return {data.data() + k * cols, cols}; }
    std::span<cfloat> row(std::size_t k) { return {data.data() + k * cols, cols}; }
};

struct NormalizationSpec {
    double scale = 2000.0;  // symmetric bounds [-scale, +scale]; 0 maps to 0 exactly
};

namespace detail {
inline void check_finite(const Raster& r, const char* op) {
    for (std::size_t k = 0; k < r.rows; ++k)
        for (std::size_t c = 0; c < r.cols; ++c) {
            const cfloat z = r.at(k, c);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                contract_fail("sarcore", std::string(op) + ": non-finite sample at (k=" +
                                             std::to_string(k) + ", r=" + std::to_string(c) + ")");
        }
}
}  // namespace detail

// Divides both components by s.scale. Pure scaling: no mean subtraction, the
// origin stays at the origin exactly.
inline Raster normalize(const Raster& r, const NormalizationSpec& s) {
    require(s.scale > 0.0, "sarcore", "normalize: scale must be > 0");
    detail::check_finite(r, "normalize");
    Raster out = r;
    const float inv = static_cast<float>(1.0 / s.scale);
    for (auto& z : out.data) z *= inv;
    return out;
}

inline Raster denormalize(const Raster& r, const NormalizationSpec& s) {
    require(s.scale > 0.0, "sarcore", "denormalize: scale must be > 0");
    detail::check_finite(r, "denormalize");
    Raster out = r;
    const float f = static_cast<float>(s.scale);
    for (auto& z : out.data) z *= f;
    return out;
}

// ---------------------------------------------------------------------------
// Little-endian packing helpers.
namespace detail {

inline void put_u16(std::string& b, std::uint16_t v) {
    b.push_back(static_cast<char>(v & 0xFF));
    b.push_back(static_cast<char>((v >> 8) & 0xFF));
}
inline void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& b, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(b, u);
}
inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline float get_f32(const unsigned char* p) {
    const std::uint32_t u = get_u32(p);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

// CRC-32 (IEEE, reflected, poly 0xEDB88320).
inline std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

// ---------------------------------------------------------------------------
// SARB raster file.
//
//   magic[8] = "SARB\0\1\0\0"
//   u32 LE header length
//   UTF-8 header: one "key: value" per line (rows, cols, stage, radar params)
//   rows*cols interleaved (f32 re, f32 im), little-endian, row-major

inline constexpr std::array<unsigned char, 8> kSarbMagic = {'S', 'A', 'R', 'B', 0, 1, 0, 0};
inline constexpr std::size_t kMaxRasterSamples = std::size_t{1} << 32;

inline std::string sarb_encode(const Raster& r) {
    require(r.rows >= 1 && r.cols >= 1 && r.data.size() == r.rows * r.cols, "sarcore",
            "write_raster: data length must equal rows*cols");
    std::ostringstream h;
    h << "rows: " << r.rows << "\n";
    h << "cols: " << r.cols << "\n";
    h << "stage: " << stage_name(r.stage) << "\n";
    if (r.params) {
        const RadarParams& p = *r.params;
        h << "prf: " << detail::fmt_double(p.prf) << "\n";
        h << "wavelength: " << detail::fmt_double(p.wavelength) << "\n";
        h << "antenna_length: " << detail::fmt_double(p.antenna_length) << "\n";
        h << "platform_velocity: " << detail::fmt_double(p.platform_velocity) << "\n";
        h << "r0: " << detail::fmt_double(p.r0) << "\n";
        h << "range_sample_rate: " << detail::fmt_double(p.range_sample_rate) << "\n";
        h << "chirp_bandwidth: " << detail::fmt_double(p.chirp_bandwidth) << "\n";
        h << "chirp_duration: " << detail::fmt_double(p.chirp_duration) << "\n";
        h << "az_spacing: " << detail::fmt_double(p.az_spacing) << "\n";
    }
    const std::string header = h.str();
    std::string out;
    out.reserve(12 + header.size() + r.data.size() * 8);
    out.append(reinterpret_cast<const char*>(kSarbMagic.data()), kSarbMagic.size());
    detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    for (const cfloat& z : r.data) {
        detail::put_f32(out, z.real());
        detail::put_f32(out, z.imag());
    }
    return out;
}

inline Raster sarb_decode(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    require(bytes.size() >= 12, "sarcore", "read_raster: file too short");
    require(std::memcmp(p, kSarbMagic.data(), 8) == 0, "sarcore", "read_raster: magic mismatch");
    const std::uint32_t hlen = detail::get_u32(p + 8);
    require(bytes.size() >= 12 + static_cast<std::size_t>(hlen), "sarcore",
            "read_raster: truncated header");
    const std::string header = bytes.substr(12, hlen);

    std::size_t rows = 0, cols = 0;
    Stage stage = Stage::RAW;
    RadarParams rp;
    bool any_param = false;
    std::istringstream hs(header);
    std::string line;
    while (std::getline(hs, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        std::string val = line.substr(colon + 1);
        while (!val.empty() && val.front() == ' ') val.erase(val.begin());
        if (key == "rows") rows = std::stoull(val);
        else if (key == "cols") cols = std::stoull(val);
        else if (key == "stage") stage = stage_from_name(val);
        else {
            const double d = std::stod(val);
            any_param = true;
            if (key == "prf") rp.prf = d;
            else if (key == "wavelength") rp.wavelength = d;
            else if (key == "antenna_length") rp.antenna_length = d;
            else if (key == "platform_velocity") rp.platform_velocity = d;
            else if (key == "r0") rp.r0 = d;
            else if (key == "range_sample_rate") rp.range_sample_rate = d;
            else if (key == "chirp_bandwidth") rp.chirp_bandwidth = d;
            else if (key == "chirp_duration") rp.chirp_duration = d;
            else if (key == "az_spacing") rp.az_spacing = d;
            else contract_fail("sarcore", "read_raster: unknown header key '" + key + "'");
        }
    }
    require(rows >= 1 && cols >= 1, "sarcore", "read_raster: missing or invalid dims");
    require(rows <= kMaxRasterSamples / cols, "sarcore", "read_raster: dimension overflow");
    const std::size_t n = rows * cols;
    const std::size_t need = 12 + hlen + n * 8;
    require(bytes.size() >= need, "sarcore",
            "read_raster: truncated payload (have " + std::to_string(bytes.size()) +
                " bytes, need " + std::to_string(need) + ")");
    Raster r(rows, cols, stage);
    const unsigned char* d = p + 12 + hlen;
    for (std::size_t i = 0; i < n; ++i) {
        r.data[i] = cfloat{detail::get_f32(d + i * 8), detail::get_f32(d + i * 8 + 4)};
    }
    if (any_param) r.params = rp;
    return r;
}

inline void write_raster(const Raster& r, const std::string& path) {
    const std::string bytes = sarb_encode(r);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), "sarcore", "write_raster: cannot open '" + path + "'");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), "sarcore", "write_raster: write failed for '" + path + "'");
}

inline Raster read_raster(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "sarcore", "read_raster: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return sarb_decode(ss.str());
}

// ---------------------------------------------------------------------------
// Grayscale export: 16-bit binary PGM (P5, maxval 65535, big-endian samples),
// per-image min-max stretch. A constant image maps to mid-gray.

enum class ImageMode { Magnitude, Db };

inline constexpr std::uint16_t kMidGray = 32768;

struct GrayImage {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint16_t> pix;
};

inline GrayImage to_image(const Raster& r, ImageMode mode) {
    require(r.rows >= 1 && r.cols >= 1, "sarcore", "to_image: empty raster");
    std::vector<double> v(r.data.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double re = r.data[i].real(), im = r.data[i].imag();
        const double p = re * re + im * im;
        v[i] = (mode == ImageMode::Magnitude) ? std::sqrt(p) : 10.0 * std::log10(p + kDbEps);
    }
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    GrayImage img{r.rows, r.cols, std::vector<std::uint16_t>(v.size())};
    if (hi <= lo) {
        for (auto& p : img.pix) p = kMidGray;
        return img;
    }
    const double s = 65535.0 / (hi - lo);
    for (std::size_t i = 0; i < v.size(); ++i)
        img.pix[i] = static_cast<std::uint16_t>(std::lround((v[i] - lo) * s));
    return img;
}

inline void write_pgm16(const GrayImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), "sarcore", "write_pgm16: cannot open '" + path + "'");
    f << "P5\n" << img.cols << " " << img.rows << "\n65535\n";
    for (std::uint16_t p : img.pix) {
        f.put(static_cast<char>((p >> 8) & 0xFF));
        f.put(static_cast<char>(p & 0xFF));
    }
    require(static_cast<bool>(f), "sarcore", "write_pgm16: write failed");
}

inline GrayImage read_pgm16(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "sarcore", "read_pgm16: cannot open '" + path + "'");
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    require(magic == "P5" && maxval == 65535, "sarcore", "read_pgm16: unsupported format");
    f.get();
    GrayImage img{h, w, std::vector<std::uint16_t>(w * h)};
    for (auto& p : img.pix) {
        const int hi = f.get(), lo = f.get();
        require(hi != EOF && lo != EOF, "sarcore", "read_pgm16: truncated");
        p = static_cast<std::uint16_t>((hi << 8) | lo);
    }
    return img;
}

// ---------------------------------------------------------------------------
// Pulse frame:
//   u16 LE magic 0x5A5A | u32 LE pulse index k | u32 LE N_r |
//   N_r * (f32 re, f32 im) LE | u32 LE CRC-32 of the sample bytes

inline constexpr std::uint16_t kFrameMagic = 0x5A5A;

inline std::string encode_pulse_frame(std::span<const cfloat> row, std::uint32_t k) {
    require(!row.empty(), "sarcore", "encode_pulse_frame: empty row");
    std::string out;
    out.reserve(14 + row.size() * 8);
    detail::put_u16(out, kFrameMagic);
    detail::put_u32(out, k);
    detail::put_u32(out, static_cast<std::uint32_t>(row.size()));
    const std::size_t payload_off = out.size();
    for (const cfloat& z : row) {
        detail::put_f32(out, z.real());
        detail::put_f32(out, z.imag());
    }
    const auto* payload = reinterpret_cast<const unsigned char*>(out.data()) + payload_off;
    detail::put_u32(out, crc32(payload, row.size() * 8));
    return out;
}

inline std::size_t pulse_frame_size(std::size_t n_r) { return 14 + n_r * 8; }

struct PulseFrame {
    std::uint32_t k = 0;
    std::vector<cfloat> row;
};

inline PulseFrame decode_pulse_frame(std::span<const unsigned char> bytes) {
    require(bytes.size() >= 14, "sarcore", "decode_pulse_frame: frame too short");
    require(detail::get_u16(bytes.data()) == kFrameMagic, "sarcore",
            "decode_pulse_frame: bad magic");
    PulseFrame out;
    out.k = detail::get_u32(bytes.data() + 2);
    const std::uint32_t n = detail::get_u32(bytes.data() + 6);
    require(n >= 1, "sarcore", "decode_pulse_frame: zero-length row");
    require(bytes.size() == pulse_frame_size(n), "sarcore",
            "decode_pulse_frame: length mismatch (N_r=" + std::to_string(n) + ")");
    const unsigned char* payload = bytes.data() + 10;
    const std::uint32_t want = detail::get_u32(payload + n * 8);
    const std::uint32_t got = crc32(payload, static_cast<std::size_t>(n) * 8);
    require(want == got, "sarcore", "decode_pulse_frame: CRC mismatch");
    out.row.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.row[i] = cfloat{detail::get_f32(payload + i * 8), detail::get_f32(payload + i * 8 + 4)};
    return out;
}

}  // namespace osp
