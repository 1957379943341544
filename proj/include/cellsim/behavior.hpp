#pragma once

// User behavior emulation: per-user position sequences (random waypoint) and
// per-user packet traces (Poisson sessions, geometric packet counts,
// lognormal sizes). All draws come from per-user keyed streams, so traces
// are reproducible and generation order does not matter.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cellsim/rng.hpp"
#include "cellsim/scenario.hpp"

namespace cellsim {

struct TrajectoryPoint {
    int t = 0;  // step index
    double x = 0.0;
    double y = 0.0;
};

struct Trajectory {
    int user_id = 0;
    double tick = 0.0;  // seconds between points
    std::vector<TrajectoryPoint> points;
};

enum class Direction : std::uint8_t { UL = 0, DL = 1 };

struct TrafficEvent {
    double t = 0.0;  // seconds
    Direction direction = Direction::DL;
    std::uint64_t bytes = 1;
};

struct TrafficTrace {
    int user_id = 0;
    std::vector<TrafficEvent> events;
};

namespace detail {

/// Deterministic class pick by cumulative fraction against one uniform draw.
template <typename T, typename FracFn>
std::size_t pick_class(const std::vector<T>& classes, FracFn frac, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        acc += frac(classes[i]);
        if (u < acc) return i;
    }
    return classes.size() - 1;
}

}  // namespace detail

inline std::size_t user_speed_class(const Scenario& sc, int user_id) {
    double u = rng_stream(sc.master_seed, "ueclass", user_id, 0).uniform();
    return detail::pick_class(sc.population.speed_classes,
                              [](const SpeedClass& c) { return c.fraction; }, u);
}

inline std::size_t user_traffic_profile(const Scenario& sc, int user_id) {
    double u = rng_stream(sc.master_seed, "ueprofile", user_id, 0).uniform();
    return detail::pick_class(sc.population.traffic_profiles,
                              [](const TrafficProfile& p) { return p.fraction; }, u);
}

inline Trajectory generate_trajectory(const Scenario& sc, int user_id,
                                      double horizon, double tick) {
    const Region& region = sc.region;
    double speed = sc.population.speed_classes[user_speed_class(sc, user_id)].speed;
    auto stream = rng_stream(sc.master_seed, "traj", user_id, 0);

    Trajectory traj;
    traj.user_id = user_id;
    traj.tick = tick;
    int n_points = static_cast<int>(horizon / tick) + 1;
    traj.points.reserve(n_points);

    double x = stream.uniform(0.0, region.width_m());
    double y = stream.uniform(0.0, region.height_m());
    if (speed <= 0.0) {
        for (int i = 0; i < n_points; ++i) traj.points.push_back({i, x, y});
        return traj;
    }

    // Random waypoint: walk continuous time, sample at tick boundaries.
    double wx = x, wy = y;      // current waypoint
    double pause_left = 0.0;    // remaining dwell at waypoint
    for (int i = 0; i < n_points; ++i) {
        traj.points.push_back({i, x, y});
        double dt = tick;
        while (dt > 0.0) {
            if (pause_left > 0.0) {
                double used = std::min(pause_left, dt);
                pause_left -= used;
                dt -= used;
                continue;
            }
            double dx = wx - x, dy = wy - y;
            double dist = std::hypot(dx, dy);
            if (dist < 1e-9) {
                wx = stream.uniform(0.0, region.width_m());
                wy = stream.uniform(0.0, region.height_m());
                pause_left = stream.uniform(0.0, 60.0);
                continue;
            }
            double reach = speed * dt;
            if (reach >= dist) {
                x = wx;
                y = wy;
                dt -= dist / speed;
            } else {
                x += dx / dist * reach;
                y += dy / dist * reach;
                dt = 0.0;
            }
        }
    }
    return traj;
}

inline std::vector<Trajectory> generate_trajectories(const Scenario& sc,
                                                     double horizon, double tick) {
    if (!(tick > 0.0) || horizon < tick)
        throw std::invalid_argument("generate_trajectories: need horizon >= tick > 0");
    std::vector<Trajectory> out;
    out.reserve(sc.population.n_users);
    for (int u = 0; u < sc.population.n_users; ++u)
        out.push_back(generate_trajectory(sc, u, horizon, tick));
    return out;
}

inline TrafficTrace generate_traffic_trace(const Scenario& sc, int user_id,
                                           double horizon) {
    const TrafficProfile& profile =
        sc.population.traffic_profiles[user_traffic_profile(sc, user_id)];
    auto stream = rng_stream(sc.master_seed, "traffic", user_id, 0);

    TrafficTrace trace;
    trace.user_id = user_id;
    if (profile.session_rate <= 0.0) return trace;

    std::uint64_t n_sessions = stream.poisson(profile.session_rate * horizon / 3600.0);
    for (std::uint64_t s = 0; s < n_sessions; ++s) {
        double start = stream.uniform(0.0, horizon);
        std::uint64_t n_packets = stream.geometric(profile.mean_session_packets);
        double t = start;
        for (std::uint64_t p = 0; p < n_packets; ++p) {
            double size = stream.lognormal(profile.packet_size_log_mu,
                                           profile.packet_size_log_sigma);
            auto bytes = static_cast<std::uint64_t>(std::ceil(size));
            if (bytes < 1) bytes = 1;
            Direction dir = stream.uniform() < profile.dl_fraction ? Direction::DL
                                                                   : Direction::UL;
            if (t < horizon) trace.events.push_back({t, dir, bytes});
            t += stream.exponential(10.0);  // 100 ms mean intra-session gap
        }
    }
    std::sort(trace.events.begin(), trace.events.end(),
              [](const TrafficEvent& a, const TrafficEvent& b) { return a.t < b.t; });
    return trace;
}

inline std::vector<TrafficTrace> generate_traffic(const Scenario& sc, double horizon) {
    if (!(horizon > 0.0))
        throw std::invalid_argument("generate_traffic: horizon must be > 0");
    std::vector<TrafficTrace> out;
    out.reserve(sc.population.n_users);
    for (int u = 0; u < sc.population.n_users; ++u)
        out.push_back(generate_traffic_trace(sc, u, horizon));
    return out;
}

/// Packet-size histogram bins: powers of two from 1 B to 1 MiB, plus one
/// overflow bin. Bin i covers [2^i, 2^(i+1)).
inline constexpr int kHistogramBins = 21;

struct BehaviorStats {
    std::vector<std::pair<int, std::uint64_t>> per_user_bytes;  // (user_id, total)
    std::array<std::uint64_t, kHistogramBins> size_histogram{};
    std::uint64_t ul_bytes = 0;
    std::uint64_t dl_bytes = 0;
    std::uint64_t total_packets = 0;
};

inline BehaviorStats behavior_stats(const std::vector<TrafficTrace>& traces) {
    BehaviorStats st;
    for (const auto& trace : traces) {
        std::uint64_t total = 0;
        for (const auto& ev : trace.events) {
            total += ev.bytes;
            (ev.direction == Direction::DL ? st.dl_bytes : st.ul_bytes) += ev.bytes;
            ++st.total_packets;
            int bin = 0;
            while (bin < kHistogramBins - 1 && (1ULL << (bin + 1)) <= ev.bytes) ++bin;
            ++st.size_histogram[bin];
        }
        st.per_user_bytes.emplace_back(trace.user_id, total);
    }
    return st;
}

}  // namespace cellsim
