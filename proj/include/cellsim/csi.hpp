#pragma once

// CSI feedback harness: a transparent delay-domain truncation + uniform
// quantization codec under a hard bit budget, and the NMSE / cosine
// fidelity metrics used to score any codec behind the same interface.
//
// Payload bit layout (MSB-first):
//   M (kept taps)        8 bits
//   q (bits/component)   4 bits
//   M tap positions      ceil(log2 n_subcarriers) bits each
//   M * n_tx * n_rx complex coefficients, 2q bits each (re then im),
//   antenna pairs tx-major, taps in position order within each pair.
// The quantizer scale travels in the report metadata, not the payload.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellsim/channel.hpp"

namespace cellsim {

inline constexpr const char* kCsiCodecId = "delay-trunc-q1";

struct CsiReport {
    int bit_budget = 0;
    std::vector<std::uint8_t> payload;  // packed bits, MSB-first
    int n_bits = 0;
    std::string codec_id = kCsiCodecId;
    int kept_taps = 0;       // M
    int quant_bits = 0;      // q
    double quant_scale = 0;  // A; levels span [-A, A]
};

namespace detail {

class BitWriter {
  public:
    void put(std::uint64_t value, int bits) {
        for (int i = bits - 1; i >= 0; --i) {
            if (pos_ % 8 == 0) bytes_.push_back(0);
            if ((value >> i) & 1) bytes_.back() |= 0x80 >> (pos_ % 8);
            ++pos_;
        }
    }
    int bit_count() const { return pos_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

  private:
    std::vector<std::uint8_t> bytes_;
    int pos_ = 0;
};

class BitReader {
  public:
    BitReader(const std::vector<std::uint8_t>& bytes, int n_bits)
        : bytes_(bytes), n_bits_(n_bits) {}
    std::uint64_t get(int bits) {
        std::uint64_t v = 0;
        for (int i = 0; i < bits; ++i) {
            if (pos_ >= n_bits_)
                throw std::runtime_error("csi payload: truncated");
            int byte = pos_ / 8;
            if (byte >= static_cast<int>(bytes_.size()))
                throw std::runtime_error("csi payload: truncated");
            v = (v << 1) | ((bytes_[byte] >> (7 - pos_ % 8)) & 1);
            ++pos_;
        }
        return v;
    }
    int consumed() const { return pos_; }

  private:
    const std::vector<std::uint8_t>& bytes_;
    int n_bits_;
    int pos_ = 0;
};

inline int ceil_log2(int n) {
    int b = 0;
    while ((1 << b) < n) ++b;
    return b;
}

/// First-symbol delay-domain coefficients per antenna pair:
/// h[n, pair] = (1/N) sum_k H[k, 0, pair] exp(+j 2 pi k n / N).
inline std::vector<cd> delay_domain(const ChannelGrid& grid) {
    int n = grid.n_subcarriers;
    int pairs = grid.n_tx * grid.n_rx;
    std::vector<cd> out(static_cast<std::size_t>(n) * pairs);
    for (int bin = 0; bin < n; ++bin)
        for (int k = 0; k < n; ++k) {
            cd w = std::polar(1.0 / n, 2.0 * std::numbers::pi * k * bin / n);
            for (int t = 0; t < grid.n_tx; ++t)
                for (int r = 0; r < grid.n_rx; ++r)
                    out[static_cast<std::size_t>(bin) * pairs + t * grid.n_rx + r] +=
                        grid.at(k, 0, t, r) * w;
        }
    return out;
}

inline std::uint64_t quantize(double v, double scale, int q) {
    std::uint64_t levels = (1ULL << q) - 1;
    if (scale <= 0.0) return 0;
    double x = (v + scale) / (2.0 * scale) * static_cast<double>(levels);
    auto code = static_cast<long long>(std::llround(x));
    if (code < 0) code = 0;
    if (code > static_cast<long long>(levels)) code = static_cast<long long>(levels);
    return static_cast<std::uint64_t>(code);
}

inline double dequantize(std::uint64_t code, double scale, int q) {
    std::uint64_t levels = (1ULL << q) - 1;
    if (levels == 0) return 0.0;
    return -scale + static_cast<double>(code) * 2.0 * scale / static_cast<double>(levels);
}

struct CodecPlan {
    int m = 0;
    int q = 0;
    std::vector<int> positions;
    double scale = 0.0;
    double nmse = 0.0;
};

}  // namespace detail

struct CsiGridSpec {
    int n_subcarriers = 32;
    int n_symbols = 1;
    int n_tx = 1;
    int n_rx = 1;
    double spacing = 30e3;
};

inline int csi_payload_bits(int m, int q, int pos_bits, int pairs) {
    return 12 + m * pos_bits + m * pairs * 2 * q;
}

/// Compresses the first-symbol channel under the bit budget. Every feasible
/// (M, q) pair is evaluated against the first-symbol slice and the one with
/// the smallest reconstruction NMSE wins (ties to larger M, then larger q),
/// which makes NMSE non-increasing in the budget by construction.
inline CsiReport csi_compress(const ChannelGrid& grid, int bit_budget) {
    if (bit_budget < 16)
        throw std::invalid_argument("csi_compress: bit budget must be >= 16");
    int n = grid.n_subcarriers;
    int pairs = grid.n_tx * grid.n_rx;
    int pos_bits = std::max(detail::ceil_log2(n), 1);

    if (csi_payload_bits(1, 1, pos_bits, pairs) > bit_budget)
        throw std::invalid_argument("csi_compress: budget too small to encode one tap");

    std::vector<cd> delay = detail::delay_domain(grid);

    // Tap positions ranked by aggregate energy across antenna pairs.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::vector<double> energy(n, 0.0);
    for (int bin = 0; bin < n; ++bin)
        for (int p = 0; p < pairs; ++p)
            energy[bin] += std::norm(delay[static_cast<std::size_t>(bin) * pairs + p]);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return energy[a] > energy[b]; });

    double signal_energy = 0.0;
    for (const auto& v : delay) signal_energy += std::norm(v);

    detail::CodecPlan best;
    bool have_best = false;
    int max_m = std::min(n, 255);
    for (int m = 1; m <= max_m; ++m) {
        std::vector<int> pos(order.begin(), order.begin() + m);
        std::sort(pos.begin(), pos.end());
        double scale = 0.0;
        for (int bin : pos)
            for (int p = 0; p < pairs; ++p) {
                const cd& v = delay[static_cast<std::size_t>(bin) * pairs + p];
                scale = std::max({scale, std::abs(v.real()), std::abs(v.imag())});
            }
        for (int q = 1; q <= 15; ++q) {
            if (csi_payload_bits(m, q, pos_bits, pairs) > bit_budget) break;
            // quantization + truncation error in the delay domain equals the
            // frequency-domain NMSE (unitary transform up to a constant)
            double err = 0.0;
            std::vector<bool> kept(n, false);
            for (int bin : pos) kept[bin] = true;
            for (int bin = 0; bin < n; ++bin)
                for (int p = 0; p < pairs; ++p) {
                    const cd& v = delay[static_cast<std::size_t>(bin) * pairs + p];
                    if (!kept[bin]) {
                        err += std::norm(v);
                        continue;
                    }
                    double re = detail::dequantize(detail::quantize(v.real(), scale, q), scale, q);
                    double im = detail::dequantize(detail::quantize(v.imag(), scale, q), scale, q);
                    err += std::norm(v - cd(re, im));
                }
            double nmse = signal_energy > 0.0 ? err / signal_energy : 0.0;
            bool better = !have_best || nmse < best.nmse ||
                          (nmse == best.nmse &&
                           (m > best.m || (m == best.m && q > best.q)));
            if (better) {
                best = {m, q, pos, scale, nmse};
                have_best = true;
            }
        }
    }

    detail::BitWriter w;
    w.put(static_cast<std::uint64_t>(best.m), 8);
    w.put(static_cast<std::uint64_t>(best.q), 4);
    for (int bin : best.positions) w.put(static_cast<std::uint64_t>(bin), pos_bits);
    for (int t = 0; t < grid.n_tx; ++t)
        for (int r = 0; r < grid.n_rx; ++r)
            for (int bin : best.positions) {
                const cd& v = delay[static_cast<std::size_t>(bin) * pairs +
                                    t * grid.n_rx + r];
                w.put(detail::quantize(v.real(), best.scale, best.q), best.q);
                w.put(detail::quantize(v.imag(), best.scale, best.q), best.q);
            }

    CsiReport report;
    report.bit_budget = bit_budget;
    report.n_bits = w.bit_count();
    report.payload = w.take();
    report.kept_taps = best.m;
    report.quant_bits = best.q;
    report.quant_scale = best.scale;
    return report;
}

/// Inverts the codec: dequantized taps, forward DFT over subcarriers,
/// replicated across symbols.
inline ChannelGrid csi_decompress(const CsiReport& report, const CsiGridSpec& spec) {
    if (report.codec_id != kCsiCodecId)
        throw std::runtime_error("csi_decompress: unknown codec '" + report.codec_id + "'");
    int n = spec.n_subcarriers;
    int pairs = spec.n_tx * spec.n_rx;
    int pos_bits = std::max(detail::ceil_log2(n), 1);

    detail::BitReader rd(report.payload, report.n_bits);
    int m = static_cast<int>(rd.get(8));
    int q = static_cast<int>(rd.get(4));
    if (m != report.kept_taps || q != report.quant_bits)
        throw std::runtime_error("csi_decompress: header/metadata mismatch");
    if (report.n_bits != csi_payload_bits(m, q, pos_bits, pairs))
        throw std::runtime_error("csi_decompress: payload length mismatch");

    std::vector<int> positions(m);
    for (int i = 0; i < m; ++i) {
        positions[i] = static_cast<int>(rd.get(pos_bits));
        if (positions[i] >= n)
            throw std::runtime_error("csi_decompress: tap position out of range");
    }

    std::vector<cd> delay(static_cast<std::size_t>(n) * pairs);
    for (int t = 0; t < spec.n_tx; ++t)
        for (int r = 0; r < spec.n_rx; ++r)
            for (int bin : positions) {
                double re = detail::dequantize(rd.get(q), report.quant_scale, q);
                double im = detail::dequantize(rd.get(q), report.quant_scale, q);
                delay[static_cast<std::size_t>(bin) * pairs + t * spec.n_rx + r] =
                    cd(re, im);
            }

    ChannelGrid grid;
    grid.n_subcarriers = n;
    grid.n_symbols = spec.n_symbols;
    grid.n_tx = spec.n_tx;
    grid.n_rx = spec.n_rx;
    grid.spacing = spec.spacing;
    grid.values.assign(static_cast<std::size_t>(n) * spec.n_symbols * pairs, cd{});
    for (int k = 0; k < n; ++k) {
        for (int t = 0; t < spec.n_tx; ++t)
            for (int r = 0; r < spec.n_rx; ++r) {
                cd h{};
                for (int bin : positions) {
                    cd w = std::polar(1.0, -2.0 * std::numbers::pi * k * bin / n);
                    h += delay[static_cast<std::size_t>(bin) * pairs + t * spec.n_rx + r] * w;
                }
                for (int s = 0; s < spec.n_symbols; ++s) grid.at(k, s, t, r) = h;
            }
    }
    return grid;
}

struct CsiFidelity {
    double nmse = 0.0;    // linear
    double cosine = 0.0;  // [0, 1]
};

inline CsiFidelity csi_fidelity(const ChannelGrid& h_true, const ChannelGrid& h_hat) {
    if (h_true.n_subcarriers != h_hat.n_subcarriers ||
        h_true.n_symbols != h_hat.n_symbols || h_true.n_tx != h_hat.n_tx ||
        h_true.n_rx != h_hat.n_rx)
        throw std::invalid_argument("csi_fidelity: dimension mismatch");
    double err = 0.0, e_true = 0.0, e_hat = 0.0;
    cd inner{};
    for (std::size_t i = 0; i < h_true.values.size(); ++i) {
        err += std::norm(h_true.values[i] - h_hat.values[i]);
        e_true += std::norm(h_true.values[i]);
        e_hat += std::norm(h_hat.values[i]);
        inner += h_true.values[i] * std::conj(h_hat.values[i]);
    }
    if (e_true <= 0.0)
        throw std::invalid_argument("csi_fidelity: all-zero reference channel");
    CsiFidelity f;
    f.nmse = err / e_true;
    f.cosine = e_hat > 0.0 ? std::abs(inner) / std::sqrt(e_true * e_hat) : 0.0;
    return f;
}

}  // namespace cellsim
