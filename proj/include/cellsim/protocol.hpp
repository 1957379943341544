#pragma once

// Base-station/terminal emulation: RRC access and A3-style handover, MAC
// scheduling (round-robin / proportional fair) with link adaptation, open-
// loop uplink power control, HARQ goodput abstraction and cell KPIs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellsim/radio.hpp"

namespace cellsim {

inline constexpr double kSeCap = 7.4063;        // bits/s/Hz per layer
inline constexpr double kBlerTarget = 0.1;      // operating point
inline constexpr double kBlerFloorSinr = -6.0;  // dB; below this, outage
inline constexpr int kSymbolsPerTti = 14;
inline constexpr double kPfSmoothing = 0.05;
inline constexpr double kPfThroughputFloor = 1.0;  // bits/s

enum class AttachState : std::uint8_t { Idle = 0, Connected = 1, Blocked = 2 };

struct Attachment {
    int user_id = 0;
    int serving_cell = -1;  // global cell index
    int serving_beam = -1;
    AttachState state = AttachState::Idle;
    double ho_timer = 0.0;        // seconds toward time-to-trigger
    double avg_throughput = kPfThroughputFloor;  // bits/s, PF-smoothed
};

struct CellMeasurement {
    int cell_index = 0;
    std::array<double, kBeamsPerCell> beam_rsrp{};
};

/// Attach to the strongest cell meeting the access threshold that still has
/// admission room; Blocked if none qualifies.
inline Attachment initial_access(int user_id,
                                 const std::vector<CellMeasurement>& measurements,
                                 double q_rxlevmin,
                                 const std::vector<int>& cell_user_counts,
                                 int max_users_per_cell) {
    if (measurements.empty())
        throw std::invalid_argument("initial_access: measurements must be non-empty");
    Attachment att;
    att.user_id = user_id;
    std::vector<std::pair<double, int>> ranked;  // (best-beam rsrp, meas index)
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        int bb = best_beam(measurements[i].beam_rsrp);
        ranked.emplace_back(measurements[i].beam_rsrp[bb], static_cast<int>(i));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [level, mi] : ranked) {
        if (level < q_rxlevmin) break;
        int ci = measurements[mi].cell_index;
        if (cell_user_counts[ci] >= max_users_per_cell) continue;
        att.state = AttachState::Connected;
        att.serving_cell = ci;
        att.serving_beam = best_beam(measurements[mi].beam_rsrp);
        return att;
    }
    att.state = AttachState::Blocked;
    return att;
}

/// A3 event: neighbor strictly better than serving by the hysteresis for a
/// full time-to-trigger window. dt is the evaluation period.
inline Attachment evaluate_handover(Attachment att,
                                    const std::vector<CellMeasurement>& measurements,
                                    double hysteresis, double ttt, double dt) {
    if (att.state != AttachState::Connected)
        throw std::logic_error("evaluate_handover: attachment not Connected");
    double serving = -std::numeric_limits<double>::infinity();
    double best_neighbor = -std::numeric_limits<double>::infinity();
    int best_cell = -1, best_nb_beam = -1;
    int serving_beam = att.serving_beam;
    for (const auto& m : measurements) {
        int bb = best_beam(m.beam_rsrp);
        if (m.cell_index == att.serving_cell) {
            serving_beam = bb;
            serving = m.beam_rsrp[bb];
        } else if (m.beam_rsrp[bb] > best_neighbor) {
            best_neighbor = m.beam_rsrp[bb];
            best_cell = m.cell_index;
            best_nb_beam = bb;
        }
    }
    att.serving_beam = serving_beam;  // beam refinement tracks the sweep
    if (best_cell >= 0 && best_neighbor > serving + hysteresis) {
        att.ho_timer += dt;
        if (att.ho_timer >= ttt) {
            att.serving_cell = best_cell;
            att.serving_beam = best_nb_beam;
            att.ho_timer = 0.0;
        }
    } else {
        att.ho_timer = 0.0;
    }
    return att;
}

struct LinkAdaptResult {
    double spectral_efficiency = 0.0;  // bits/s/Hz, all layers
    int rank = 1;
    double bler = kBlerTarget;
};

/// SINR-to-rate mapping: rank <= 2 with a 3 dB per-layer penalty at rank 2,
/// Shannon SE capped per layer, two-level BLER curve.
inline LinkAdaptResult link_adapt(double sinr_db, int n_tx, int n_rx) {
    if (!std::isfinite(sinr_db))
        throw std::invalid_argument("link_adapt: non-finite SINR");
    LinkAdaptResult r;
    r.rank = std::min({n_tx, n_rx, 2});
    double per_layer_db = sinr_db - (r.rank == 2 ? 3.0 : 0.0);
    double per_layer = std::log2(1.0 + db_to_linear(per_layer_db));
    r.spectral_efficiency = r.rank * std::min(per_layer, kSeCap);
    r.bler = sinr_db >= kBlerFloorSinr ? kBlerTarget : 1.0;
    return r;
}

/// Open-loop uplink power: min(p_max, p0 + 10 log10(m_rb) + alpha * pl).
inline double uplink_power(double p0, double alpha, double pl, int m_rb, double p_max) {
    if (m_rb < 1) throw std::invalid_argument("uplink_power: m_rb must be >= 1");
    return std::min(p_max, p0 + linear_to_db(static_cast<double>(m_rb)) + alpha * pl);
}

struct HarqResult {
    double factor = 1.0;         // per-attempt goodput discount
    double residual_bler = 0.0;  // after max_tx attempts
};

inline HarqResult harq_goodput_factor(double bler, int max_tx) {
    if (max_tx < 1) throw std::invalid_argument("harq_goodput_factor: max_tx must be >= 1");
    if (bler < 0.0 || bler > 1.0)
        throw std::invalid_argument("harq_goodput_factor: bler outside [0, 1]");
    return {1.0 - bler, std::pow(bler, max_tx)};
}

enum class SchedulerPolicy : std::uint8_t { RoundRobin = 0, ProportionalFair = 1 };

struct UserLink {
    int user_id = 0;
    double sinr_db = 0.0;
    std::uint64_t buffer_bytes = 0;
    double avg_throughput = kPfThroughputFloor;  // bits/s, for PF priority
    int n_rx = 2;
};

struct UserGrant {
    int user_id = 0;
    int rb_count = 0;
    double spectral_efficiency = 0.0;
    int rank = 1;
    double bler = kBlerTarget;
    std::uint64_t transport_bytes = 0;
};

struct TtiAllocation {
    std::vector<UserGrant> grants;
    int rb_total = 0;
    int rb_used = 0;
    double load() const {
        return rb_total > 0 ? static_cast<double>(rb_used) / rb_total : 0.0;
    }
};

inline std::uint64_t transport_capacity_bytes(int rb_count, double se) {
    double bits = static_cast<double>(rb_count) * 12.0 * kSymbolsPerTti * se;
    return static_cast<std::uint64_t>(bits / 8.0);
}

/// One TTI of MAC scheduling for one cell and one direction. Users with
/// empty buffers get nothing; grants are buffer-limited.
inline TtiAllocation schedule_tti(int rb_total, int n_tx,
                                  const std::vector<UserLink>& users,
                                  SchedulerPolicy policy) {
    if (rb_total < 1) throw std::invalid_argument("schedule_tti: rb_total must be >= 1");
    TtiAllocation alloc;
    alloc.rb_total = rb_total;

    std::vector<const UserLink*> active;
    for (const auto& u : users)
        if (u.buffer_bytes > 0) active.push_back(&u);
    if (active.empty()) return alloc;

    std::sort(active.begin(), active.end(), [&](const UserLink* a, const UserLink* b) {
        if (policy == SchedulerPolicy::ProportionalFair) {
            double pa = link_adapt(a->sinr_db, n_tx, a->n_rx).spectral_efficiency /
                        std::max(a->avg_throughput, kPfThroughputFloor);
            double pb = link_adapt(b->sinr_db, n_tx, b->n_rx).spectral_efficiency /
                        std::max(b->avg_throughput, kPfThroughputFloor);
            if (pa != pb) return pa > pb;
        }
        return a->user_id < b->user_id;
    });

    int rb_left = rb_total;
    if (policy == SchedulerPolicy::RoundRobin) {
        // equal split, remainder to the lowest user ids
        int n = static_cast<int>(active.size());
        int share = rb_total / n;
        int extra = rb_total % n;
        std::vector<const UserLink*> by_id = active;
        std::sort(by_id.begin(), by_id.end(),
                  [](const UserLink* a, const UserLink* b) { return a->user_id < b->user_id; });
        for (int i = 0; i < n; ++i) {
            const UserLink* u = by_id[i];
            int rbs = share + (i < extra ? 1 : 0);
            if (rbs == 0) continue;
            LinkAdaptResult la = link_adapt(u->sinr_db, n_tx, u->n_rx);
            UserGrant g;
            g.user_id = u->user_id;
            g.spectral_efficiency = la.spectral_efficiency;
            g.rank = la.rank;
            g.bler = la.bler;
            // shrink the grant to the buffer
            std::uint64_t cap = transport_capacity_bytes(rbs, la.spectral_efficiency);
            if (cap > u->buffer_bytes && la.spectral_efficiency > 0.0) {
                int need = static_cast<int>(std::ceil(
                    static_cast<double>(u->buffer_bytes) * 8.0 /
                    (12.0 * kSymbolsPerTti * la.spectral_efficiency)));
                rbs = std::max(1, std::min(rbs, need));
                cap = transport_capacity_bytes(rbs, la.spectral_efficiency);
            }
            g.rb_count = rbs;
            g.transport_bytes = std::min<std::uint64_t>(cap, u->buffer_bytes);
            rb_left -= rbs;
            alloc.grants.push_back(g);
        }
    } else {
        // PF: full buffer-limited grants in priority order
        for (const UserLink* u : active) {
            if (rb_left == 0) break;
            LinkAdaptResult la = link_adapt(u->sinr_db, n_tx, u->n_rx);
            if (la.spectral_efficiency <= 0.0) continue;
            double need = std::ceil(static_cast<double>(u->buffer_bytes) * 8.0 /
                                    (12.0 * kSymbolsPerTti * la.spectral_efficiency));
            int rbs = need >= rb_left ? rb_left
                                      : std::max(static_cast<int>(need), 1);
            UserGrant g;
            g.user_id = u->user_id;
            g.rb_count = rbs;
            g.spectral_efficiency = la.spectral_efficiency;
            g.rank = la.rank;
            g.bler = la.bler;
            g.transport_bytes = std::min<std::uint64_t>(
                transport_capacity_bytes(rbs, la.spectral_efficiency), u->buffer_bytes);
            rb_left -= rbs;
            alloc.grants.push_back(g);
        }
    }
    alloc.rb_used = rb_total - rb_left;
    return alloc;
}

struct CellKpis {
    std::string cell_id;
    int connected_users = 0;
    double load = 0.0;        // mean RB fraction over the window
    double dl_rate = 0.0;     // bits/s, HARQ-discounted
    double ul_rate = 0.0;
    std::uint64_t dl_bytes = 0;  // goodput over the window
    std::uint64_t ul_bytes = 0;
};

/// Aggregates a window of TTI allocations into per-cell KPIs. dl/ul windows
/// must hold one allocation per TTI; window_seconds is the represented span.
inline CellKpis cell_kpis(const std::string& cell_id, int connected_users,
                          const std::vector<TtiAllocation>& dl_window,
                          const std::vector<TtiAllocation>& ul_window,
                          double window_seconds, int harq_max_tx) {
    if (dl_window.empty() && ul_window.empty())
        throw std::invalid_argument("cell_kpis: window must be non-empty");
    CellKpis k;
    k.cell_id = cell_id;
    k.connected_users = connected_users;
    double load_sum = 0.0;
    std::size_t load_n = 0;
    double dl_bits = 0.0, ul_bits = 0.0;
    for (const auto& a : dl_window) {
        load_sum += a.load();
        ++load_n;
        for (const auto& g : a.grants)
            dl_bits += static_cast<double>(g.transport_bytes) * 8.0 *
                       harq_goodput_factor(g.bler, harq_max_tx).factor;
    }
    for (const auto& a : ul_window) {
        for (const auto& g : a.grants)
            ul_bits += static_cast<double>(g.transport_bytes) * 8.0 *
                       harq_goodput_factor(g.bler, harq_max_tx).factor;
    }
    k.load = load_n > 0 ? load_sum / static_cast<double>(load_n) : 0.0;
    if (window_seconds > 0.0) {
        k.dl_rate = dl_bits / window_seconds;
        k.ul_rate = ul_bits / window_seconds;
    }
    k.dl_bytes = static_cast<std::uint64_t>(dl_bits / 8.0);
    k.ul_bytes = static_cast<std::uint64_t>(ul_bits / 8.0);
    return k;
}

}  // namespace cellsim
