#pragma once

// Small-scale fading: tapped-delay-line multipath draws and RE-level
// frequency-domain channel grids, plus the byte-exact channel binary format.

#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cellsim/rng.hpp"

namespace cellsim {

using cd = std::complex<double>;

struct Tap {
    double delay = 0.0;          // seconds
    double power = 1.0;          // linear, taps sum to 1
    double doppler_shift = 0.0;  // Hz, per-tap offset in [-doppler_hz, doppler_hz]
    std::vector<cd> gains;       // per (tx, rx) pair, tx-major; E[|g|^2] = power
};

struct TapSet {
    std::vector<Tap> taps;
    int n_tx = 1;
    int n_rx = 1;
    double rician_k = 0.0;   // linear; 0 = Rayleigh
    double doppler_hz = 0.0;

    const cd& gain(int tap, int tx, int rx) const {
        return taps[tap].gains[static_cast<std::size_t>(tx) * n_rx + rx];
    }
};

struct MultipathProfile {
    int n_taps = 8;
    double delay_spread = 100e-9;  // seconds
    double rician_k = 0.0;         // linear
    double doppler_hz = 0.0;
};

/// Draws a TapSet: delays on a uniform grid over the delay spread, powers on
/// an exponential profile normalized to sum 1, tap 0 carrying the Rician LOS
/// component, diffuse parts circularly-symmetric complex normal.
inline TapSet draw_multipath(const MultipathProfile& profile, int n_tx, int n_rx,
                             RngStream& stream) {
    if (profile.n_taps < 1 || !(profile.delay_spread > 0.0) || profile.rician_k < 0.0)
        throw std::invalid_argument("draw_multipath: invalid profile");
    if (n_tx < 1 || n_rx < 1)
        throw std::invalid_argument("draw_multipath: antenna counts must be >= 1");

    TapSet ts;
    ts.n_tx = n_tx;
    ts.n_rx = n_rx;
    ts.rician_k = profile.rician_k;
    ts.doppler_hz = profile.doppler_hz;
    ts.taps.resize(profile.n_taps);

    double norm = 0.0;
    for (int i = 0; i < profile.n_taps; ++i) {
        ts.taps[i].delay = i * profile.delay_spread / profile.n_taps;
        ts.taps[i].power = std::exp(-ts.taps[i].delay / profile.delay_spread);
        norm += ts.taps[i].power;
    }
    for (auto& tap : ts.taps) tap.power /= norm;

    double k = profile.rician_k;
    for (int i = 0; i < profile.n_taps; ++i) {
        Tap& tap = ts.taps[i];
        tap.doppler_shift = profile.doppler_hz > 0.0
                                ? stream.uniform(-profile.doppler_hz, profile.doppler_hz)
                                : 0.0;
        tap.gains.resize(static_cast<std::size_t>(n_tx) * n_rx);
        double amp = std::sqrt(tap.power);
        for (auto& g : tap.gains) {
            cd diffuse(stream.normal() / std::numbers::sqrt2,
                       stream.normal() / std::numbers::sqrt2);
            if (i == 0 && k > 0.0) {
                double phase = stream.uniform(0.0, 2.0 * std::numbers::pi);
                cd los = std::polar(1.0, phase);
                g = amp * (std::sqrt(k / (k + 1.0)) * los +
                           std::sqrt(1.0 / (k + 1.0)) * diffuse);
            } else {
                g = amp * diffuse;
            }
        }
    }
    return ts;
}

struct GridSpec {
    int n_subcarriers = 1;
    int n_symbols = 1;
    double spacing = 30e3;           // Hz
    double symbol_duration = 1.0 / 30e3;  // seconds
};

struct ChannelGrid {
    int n_subcarriers = 1;
    int n_symbols = 1;
    int n_tx = 1;
    int n_rx = 1;
    double spacing = 30e3;  // Hz
    bool large_scale_applied = false;
    // Values indexed [subcarrier][symbol][tx][rx], subcarrier slowest.
    std::vector<cd> values;

    std::size_t index(int k, int s, int t, int r) const {
        return ((static_cast<std::size_t>(k) * n_symbols + s) * n_tx + t) * n_rx + r;
    }
    cd& at(int k, int s, int t, int r) { return values[index(k, s, t, r)]; }
    const cd& at(int k, int s, int t, int r) const { return values[index(k, s, t, r)]; }
    std::size_t size() const { return values.size(); }
};

/// Frequency response over the RE grid:
///   H[k,s,t,r] = sum_l g_l[t,r] * exp(-j 2 pi f_k tau_l) * exp(j 2 pi nu_l t_s)
/// with f_k = k * spacing (baseband offset of subcarrier k) and t_s the
/// symbol start time.
inline ChannelGrid freq_response(const TapSet& taps, const GridSpec& spec) {
    if (spec.n_subcarriers < 1 || spec.n_symbols < 1)
        throw std::invalid_argument("freq_response: grid dims must be >= 1");
    ChannelGrid grid;
    grid.n_subcarriers = spec.n_subcarriers;
    grid.n_symbols = spec.n_symbols;
    grid.n_tx = taps.n_tx;
    grid.n_rx = taps.n_rx;
    grid.spacing = spec.spacing;
    grid.values.assign(static_cast<std::size_t>(spec.n_subcarriers) * spec.n_symbols *
                           taps.n_tx * taps.n_rx,
                       cd{});
    for (int k = 0; k < spec.n_subcarriers; ++k) {
        double fk = k * spec.spacing;
        for (int s = 0; s < spec.n_symbols; ++s) {
            double ts = s * spec.symbol_duration;
            for (const auto& tap : taps.taps) {
                cd phase = std::polar(1.0, -2.0 * std::numbers::pi * fk * tap.delay) *
                           std::polar(1.0, 2.0 * std::numbers::pi * tap.doppler_shift * ts);
                for (int t = 0; t < taps.n_tx; ++t)
                    for (int r = 0; r < taps.n_rx; ++r)
                        grid.at(k, s, t, r) +=
                            tap.gains[static_cast<std::size_t>(t) * taps.n_rx + r] * phase;
            }
        }
    }
    return grid;
}

/// Scales the grid by the link budget, amplitude 10^((gain - loss)/20).
/// A grid can carry large-scale scaling only once.
inline ChannelGrid apply_large_scale(const ChannelGrid& grid, double loss_db,
                                     double gain_db) {
    if (grid.large_scale_applied)
        throw std::logic_error("apply_large_scale: already applied");
    ChannelGrid out = grid;
    double scale = std::pow(10.0, (gain_db - loss_db) / 20.0);
    for (auto& v : out.values) v *= scale;
    out.large_scale_applied = true;
    return out;
}

// --- channel binary format ------------------------------------------------
// magic "JTCH", version u16, dims as four u32 (subcarriers, symbols, tx, rx),
// spacing f64, then interleaved little-endian f32 (re, im) in subcarrier-
// major order (subcarrier, then symbol, tx, rx).

inline constexpr char kChannelMagic[4] = {'J', 'T', 'C', 'H'};
inline constexpr std::uint16_t kChannelVersion = 1;

inline void write_channel(const ChannelGrid& grid, std::ostream& out) {
    out.write(kChannelMagic, 4);
    auto put = [&](const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    std::uint16_t ver = kChannelVersion;
    put(&ver, 2);
    std::uint32_t dims[4] = {static_cast<std::uint32_t>(grid.n_subcarriers),
                             static_cast<std::uint32_t>(grid.n_symbols),
                             static_cast<std::uint32_t>(grid.n_tx),
                             static_cast<std::uint32_t>(grid.n_rx)};
    put(dims, sizeof(dims));
    put(&grid.spacing, 8);
    for (const cd& v : grid.values) {
        float re = static_cast<float>(v.real());
        float im = static_cast<float>(v.imag());
        put(&re, 4);
        put(&im, 4);
    }
}

inline void write_channel_file(const ChannelGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write channel file: " + path);
    write_channel(grid, out);
}

inline ChannelGrid read_channel(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kChannelMagic, 4) != 0)
        throw std::runtime_error("channel file: bad magic");
    auto get = [&](void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw std::runtime_error("channel file: truncated");
    };
    std::uint16_t ver;
    get(&ver, 2);
    if (ver != kChannelVersion)
        throw std::runtime_error("channel file: unsupported version");
    std::uint32_t dims[4];
    get(dims, sizeof(dims));
    ChannelGrid grid;
    grid.n_subcarriers = static_cast<int>(dims[0]);
    grid.n_symbols = static_cast<int>(dims[1]);
    grid.n_tx = static_cast<int>(dims[2]);
    grid.n_rx = static_cast<int>(dims[3]);
    get(&grid.spacing, 8);
    std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * dims[3];
    grid.values.resize(n);
    for (auto& v : grid.values) {
        float re, im;
        get(&re, 4);
        get(&im, 4);
        v = cd(re, im);
    }
    return grid;
}

inline ChannelGrid read_channel_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open channel file: " + path);
    return read_channel(in);
}

}  // namespace cellsim
