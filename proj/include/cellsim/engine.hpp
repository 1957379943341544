#pragma once

// Episode engine: composes behavior, radio and protocol-stack emulation into
// the stepped five-minute loop, computes KPI frames and the weighted
// multi-objective reward, and exposes the reset/step environment contract.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellsim/behavior.hpp"
#include "cellsim/channel.hpp"
#include "cellsim/protocol.hpp"
#include "cellsim/radio.hpp"
#include "cellsim/scenario.hpp"

namespace cellsim {

inline constexpr double kTtiSeconds = 1e-3;

struct MetricAnchor {
    double lo = 0.0;
    double hi = 1.0;
};

struct RewardWeights {
    double w_rsrp = 1.0;
    double w_sinr = 1.0;
    double w_users = 1.0;
    double w_traffic = 1.0;
    double w_rate = 1.0;
    MetricAnchor rsrp{-120.0, -80.0};   // dBm
    MetricAnchor sinr{-5.0, 25.0};      // dB
    MetricAnchor users{0.0, 1.0};       // set from population
    MetricAnchor traffic{0.0, 1.0};     // bytes/step, set from population
    MetricAnchor rate{0.0, 200e6};      // bits/s
};

/// Expected offered bytes per step from the traffic model; used as the
/// default traffic normalization anchor.
inline double expected_traffic_per_step(const Scenario& sc, double step_seconds) {
    double per_user_per_s = 0.0;
    for (const auto& p : sc.population.traffic_profiles) {
        double mean_pkt = std::exp(p.packet_size_log_mu +
                                   p.packet_size_log_sigma * p.packet_size_log_sigma / 2.0);
        per_user_per_s += p.fraction * p.session_rate / 3600.0 *
                          p.mean_session_packets * mean_pkt;
    }
    return std::max(1.0, per_user_per_s * sc.population.n_users * step_seconds);
}

inline RewardWeights default_weights(const Scenario& sc, double step_seconds = 300.0) {
    RewardWeights w;
    w.users.hi = std::max(1.0, static_cast<double>(sc.population.n_users));
    w.traffic.hi = expected_traffic_per_step(sc, step_seconds);
    return w;
}

struct FrameAggregates {
    double mean_rsrp = 0.0;   // dBm over connected users
    double mean_sinr = 0.0;   // dB
    int connected_users = 0;
    double traffic_bytes = 0.0;  // served this step
    double mean_rate = 0.0;      // bits/s per connected user
};

inline double reward(const FrameAggregates& agg, const RewardWeights& w) {
    auto norm = [](double v, const MetricAnchor& a) {
        if (!(a.hi > a.lo)) throw std::invalid_argument("reward: anchor hi must exceed lo");
        double x = (v - a.lo) / (a.hi - a.lo);
        return std::clamp(x, 0.0, 1.0);
    };
    return w.w_rsrp * norm(agg.mean_rsrp, w.rsrp) +
           w.w_sinr * norm(agg.mean_sinr, w.sinr) +
           w.w_users * norm(static_cast<double>(agg.connected_users), w.users) +
           w.w_traffic * norm(agg.traffic_bytes, w.traffic) +
           w.w_rate * norm(agg.mean_rate, w.rate);
}

struct CellRecord {
    CellKpis kpis;
    double sum_rsrp = 0.0;  // over this cell's connected users
    double sum_sinr = 0.0;
    int n_measured = 0;
};

struct UserRecord {
    int user_id = 0;
    int serving_cell = -1;
    int serving_beam = -1;
    AttachState state = AttachState::Idle;
    double rsrp = 0.0;
    double sinr = 0.0;
    double dl_rate = 0.0;  // bits/s
    double ul_rate = 0.0;
};

struct KpiFrame {
    int step = 0;
    std::vector<CellRecord> cells;
    std::vector<UserRecord> users;
    FrameAggregates aggregates;
    double reward_value = 0.0;
};

enum class EmulatorMode : std::uint8_t { ProtocolStack = 0, CoverageOnly = 1 };

struct EpisodeSpec {
    Scenario scenario;
    int horizon_steps = 1;
    double step_seconds = 300.0;
    RewardWeights weights;
    EmulatorMode mode = EmulatorMode::ProtocolStack;
    SchedulerPolicy scheduler = SchedulerPolicy::ProportionalFair;
    bool shadowing = true;

    static EpisodeSpec make(Scenario sc, int horizon, EmulatorMode mode) {
        EpisodeSpec spec;
        spec.weights = default_weights(sc);
        spec.scenario = std::move(sc);
        spec.horizon_steps = horizon;
        spec.mode = mode;
        return spec;
    }
};

class Engine {
  public:
    explicit Engine(EpisodeSpec spec) : spec_(std::move(spec)) {
        if (spec_.horizon_steps < 1)
            throw std::invalid_argument("EpisodeSpec: horizon_steps must be >= 1");
        if (!(spec_.step_seconds > 0.0))
            throw std::invalid_argument("EpisodeSpec: step_seconds must be > 0");
        validate(spec_.scenario);
        cells_ = all_cells(spec_.scenario);
        model_ = path_loss_model_for(spec_.scenario);
    }

    const EpisodeSpec& spec() const { return spec_; }

    /// Initializes episode state and returns the baseline observation: a
    /// coverage-only evaluation at step 0 under the currently configured
    /// beams (no traffic, static interference loads).
    KpiFrame reset() {
        const Scenario& sc = spec_.scenario;
        double horizon_s = spec_.horizon_steps * spec_.step_seconds;
        trajectories_ = sc.population.n_users > 0
                            ? generate_trajectories(sc, horizon_s, spec_.step_seconds)
                            : std::vector<Trajectory>{};
        traffic_ = spec_.mode == EmulatorMode::ProtocolStack
                       ? generate_traffic(sc, horizon_s)
                       : std::vector<TrafficTrace>{};
        action_ = current_action(sc);
        attachments_.assign(sc.population.n_users, Attachment{});
        for (int u = 0; u < sc.population.n_users; ++u) attachments_[u].user_id = u;
        dl_backlog_.assign(sc.population.n_users, 0);
        ul_backlog_.assign(sc.population.n_users, 0);
        cell_loads_.assign(cells_.size(), sc.radio.static_load);
        next_event_.assign(sc.population.n_users, 0);
        step_index_ = 0;
        done_ = false;
        active_ = true;
        return coverage_step_frame(0, false);
    }

    bool done() const { return done_; }
    int step_index() const { return step_index_; }

    struct StepResult {
        KpiFrame frame;
        double reward = 0.0;
        bool done = false;
    };

    /// Applies the action (empty optional keeps the current configuration),
    /// advances one step and returns the frame.
    StepResult step(const std::optional<Action>& action = std::nullopt) {
        if (!active_) throw std::logic_error("env_step: call reset() first");
        if (done_) throw std::logic_error("env_step: episode already done");
        if (action) {
            validate_action(spec_.scenario, *action);
            action_ = *action;
        }
        KpiFrame frame = spec_.mode == EmulatorMode::CoverageOnly
                             ? coverage_step_frame(step_index_, true)
                             : stack_step_frame(step_index_);
        ++step_index_;
        done_ = step_index_ >= spec_.horizon_steps;
        return {frame, frame.reward_value, done_};
    }

    const std::vector<Trajectory>& trajectories() const { return trajectories_; }
    const std::vector<TrafficTrace>& traffic() const { return traffic_; }

  private:
    std::vector<EvalPoint> user_points(int step) const {
        std::vector<EvalPoint> points;
        points.reserve(trajectories_.size());
        for (const auto& traj : trajectories_) {
            const auto& p = traj.points[std::min<std::size_t>(step, traj.points.size() - 1)];
            points.push_back({p.x, p.y, spec_.scenario.population.ue_height, traj.user_id});
        }
        return points;
    }

    /// Per-user SINR at the attached (cell, beam); interference from every
    /// other cell's strongest beam at the user, weighted by cell load.
    double user_sinr(const CoverageFrame& frame, int user, int cell, int beam,
                     const std::vector<double>& loads) const {
        double serving = frame.rsrp_at(user, cell, beam);
        std::vector<double> interferers, lf;
        for (std::size_t ci = 0; ci < cells_.size(); ++ci) {
            if (static_cast<int>(ci) == cell) continue;
            double best = -std::numeric_limits<double>::infinity();
            for (int bi = 0; bi < kBeamsPerCell; ++bi)
                best = std::max(best, frame.rsrp_at(user, static_cast<int>(ci), bi));
            interferers.push_back(best);
            lf.push_back(loads[ci]);
        }
        return sinr(serving, interferers, noise_per_re_dbm(spec_.scenario), lf);
    }

    void finalize_frame(KpiFrame& frame) const {
        FrameAggregates& agg = frame.aggregates;
        double sum_rsrp = 0.0, sum_sinr = 0.0, sum_rate = 0.0, traffic_bytes = 0.0;
        int n = 0;
        for (const auto& c : frame.cells) {
            sum_rsrp += c.sum_rsrp;
            sum_sinr += c.sum_sinr;
            n += c.n_measured;
            traffic_bytes += static_cast<double>(c.kpis.dl_bytes + c.kpis.ul_bytes);
        }
        for (const auto& u : frame.users) sum_rate += u.dl_rate + u.ul_rate;
        agg.connected_users = n;
        agg.mean_rsrp = n > 0 ? sum_rsrp / n : 0.0;
        agg.mean_sinr = n > 0 ? sum_sinr / n : 0.0;
        agg.traffic_bytes = traffic_bytes;
        agg.mean_rate = n > 0 ? sum_rate / n : 0.0;
        frame.reward_value = reward(agg, spec_.weights);
    }

    /// Coverage-only evaluation: serving by global RSRP argmax, connected
    /// when the serving RSRP clears the access threshold, no traffic.
    KpiFrame coverage_step_frame(int step, bool /*advance*/) {
        const Scenario& sc = spec_.scenario;
        KpiFrame frame;
        frame.step = step;
        frame.cells.resize(cells_.size());
        for (const auto& ref : cells_) {
            frame.cells[ref.index].kpis.cell_id = ref.cell->cell_id;
            frame.cells[ref.index].kpis.load = cell_loads_[ref.index];
        }
        if (!trajectories_.empty()) {
            auto points = user_points(step);
            CoverageFrame cov = coverage_frame(sc, model_, points, action_, step,
                                               cell_loads_, spec_.shadowing);
            for (std::size_t ui = 0; ui < points.size(); ++ui) {
                UserRecord rec;
                rec.user_id = points[ui].point_id;
                rec.serving_cell = cov.serving_cell[ui];
                rec.serving_beam = cov.serving_beam[ui];
                rec.rsrp = cov.rsrp_at(static_cast<int>(ui), rec.serving_cell, rec.serving_beam);
                rec.sinr = cov.sinr_db[ui];
                rec.state = rec.rsrp >= sc.radio.q_rxlevmin ? AttachState::Connected
                                                            : AttachState::Idle;
                if (rec.state == AttachState::Connected) {
                    CellRecord& c = frame.cells[rec.serving_cell];
                    c.kpis.connected_users += 1;
                    c.sum_rsrp += rec.rsrp;
                    c.sum_sinr += rec.sinr;
                    c.n_measured += 1;
                }
                frame.users.push_back(rec);
            }
        }
        finalize_frame(frame);
        return frame;
    }

    KpiFrame stack_step_frame(int step) {
        const Scenario& sc = spec_.scenario;
        KpiFrame frame;
        frame.step = step;
        frame.cells.resize(cells_.size());
        for (const auto& ref : cells_)
            frame.cells[ref.index].kpis.cell_id = ref.cell->cell_id;

        int n_users = sc.population.n_users;
        if (n_users == 0) {
            finalize_frame(frame);
            cell_loads_.assign(cells_.size(), 0.0);
            return frame;
        }

        auto points = user_points(step);
        CoverageFrame cov = coverage_frame(sc, model_, points, action_, step,
                                           cell_loads_, spec_.shadowing);

        // RRC pass, deterministic by user id: access for Idle/Blocked,
        // A3 handover for Connected.
        std::vector<int> counts(cells_.size(), 0);
        for (const auto& att : attachments_)
            if (att.state == AttachState::Connected) ++counts[att.serving_cell];
        for (int u = 0; u < n_users; ++u) {
            std::vector<CellMeasurement> meas(cells_.size());
            for (std::size_t ci = 0; ci < cells_.size(); ++ci) {
                meas[ci].cell_index = static_cast<int>(ci);
                for (int bi = 0; bi < kBeamsPerCell; ++bi)
                    meas[ci].beam_rsrp[bi] = cov.rsrp_at(u, static_cast<int>(ci), bi);
            }
            Attachment& att = attachments_[u];
            if (att.state == AttachState::Connected) {
                int old_cell = att.serving_cell;
                att = evaluate_handover(att, meas, sc.radio.ho_hysteresis,
                                        sc.radio.ho_ttt, spec_.step_seconds);
                if (att.serving_cell != old_cell) {
                    --counts[old_cell];
                    ++counts[att.serving_cell];
                }
                // drop users that fell below the access threshold
                if (meas[att.serving_cell].beam_rsrp[att.serving_beam] < sc.radio.q_rxlevmin) {
                    --counts[att.serving_cell];
                    att.state = AttachState::Idle;
                    att.serving_cell = -1;
                    att.serving_beam = -1;
                    att.ho_timer = 0.0;
                }
            } else {
                double avg = att.avg_throughput;
                att = initial_access(u, meas, sc.radio.q_rxlevmin, counts,
                                     sc.radio.max_users_per_cell);
                att.avg_throughput = avg;
                if (att.state == AttachState::Connected) ++counts[att.serving_cell];
            }
        }

        // traffic arrivals for [step*dt, (step+1)*dt)
        double t0 = step * spec_.step_seconds;
        double t1 = t0 + spec_.step_seconds;
        for (int u = 0; u < n_users; ++u) {
            const auto& events = traffic_[u].events;
            std::size_t& cursor = next_event_[u];
            while (cursor < events.size() && events[cursor].t < t1) {
                if (events[cursor].t >= t0) {
                    if (events[cursor].direction == Direction::DL)
                        dl_backlog_[u] += events[cursor].bytes;
                    else
                        ul_backlog_[u] += events[cursor].bytes;
                }
                ++cursor;
            }
        }

        // Per-user link state for the step.
        std::vector<double> dl_sinr(n_users, 0.0), ul_sinr(n_users, 0.0);
        std::vector<double> coupling_loss(n_users, 0.0);
        double noise = noise_per_re_dbm(sc);
        for (int u = 0; u < n_users; ++u) {
            const Attachment& att = attachments_[u];
            if (att.state != AttachState::Connected) continue;
            dl_sinr[u] = user_sinr(cov, u, att.serving_cell, att.serving_beam, cell_loads_);
            const CellRef& ref = cells_[att.serving_cell];
            double tx_per_re = ref.cell->tx_power -
                               linear_to_db(sc.radio.rb_per_cell * 12.0);
            coupling_loss[u] = tx_per_re - cov.rsrp_at(u, att.serving_cell, att.serving_beam);
            double p_ul = uplink_power(sc.radio.p0, sc.radio.ul_alpha, coupling_loss[u],
                                       1, sc.radio.p_max);
            // BS receiver noise figure 5 dB vs the UE's configured figure
            double bs_noise = noise - sc.population.ue_noise_figure + 5.0;
            ul_sinr[u] = p_ul - linear_to_db(12.0) - coupling_loss[u] - bs_noise;
        }

        // TTI budget with time compression: `budget` representative TTIs
        // stand for the whole step.
        int budget = std::max(1, sc.radio.tti_budget);
        double sim_window = budget * kTtiSeconds;
        double compression = spec_.step_seconds / sim_window;
        std::vector<std::uint64_t> dl_sim(n_users), ul_sim(n_users);
        for (int u = 0; u < n_users; ++u) {
            dl_sim[u] = static_cast<std::uint64_t>(
                std::ceil(static_cast<double>(dl_backlog_[u]) / compression));
            ul_sim[u] = static_cast<std::uint64_t>(
                std::ceil(static_cast<double>(ul_backlog_[u]) / compression));
        }

        std::vector<std::vector<TtiAllocation>> dl_windows(cells_.size()),
            ul_windows(cells_.size());
        std::vector<std::uint64_t> dl_served(n_users, 0), ul_served(n_users, 0);
        for (int tti = 0; tti < budget; ++tti) {
            for (const auto& ref : cells_) {
                std::vector<UserLink> dl_users, ul_users;
                for (int u = 0; u < n_users; ++u) {
                    const Attachment& att = attachments_[u];
                    if (att.state != AttachState::Connected ||
                        att.serving_cell != ref.index)
                        continue;
                    if (dl_sim[u] > 0)
                        dl_users.push_back({u, dl_sinr[u], dl_sim[u],
                                            attachments_[u].avg_throughput,
                                            sc.population.ue_antennas});
                    if (ul_sim[u] > 0)
                        ul_users.push_back({u, ul_sinr[u], ul_sim[u],
                                            attachments_[u].avg_throughput, 1});
                }
                TtiAllocation dl = schedule_tti(sc.radio.rb_per_cell,
                                                ref.cell->n_tx_antennas, dl_users,
                                                spec_.scheduler);
                TtiAllocation ul = schedule_tti(sc.radio.rb_per_cell, 1, ul_users,
                                                spec_.scheduler);
                for (const auto& g : dl.grants) {
                    dl_sim[g.user_id] -= std::min(dl_sim[g.user_id], g.transport_bytes);
                    dl_served[g.user_id] += g.transport_bytes;
                    double inst = static_cast<double>(g.transport_bytes) * 8.0 / kTtiSeconds;
                    double& avg = attachments_[g.user_id].avg_throughput;
                    avg = std::max((1.0 - kPfSmoothing) * avg + kPfSmoothing * inst,
                                   kPfThroughputFloor);
                }
                for (const auto& g : ul.grants) {
                    ul_sim[g.user_id] -= std::min(ul_sim[g.user_id], g.transport_bytes);
                    ul_served[g.user_id] += g.transport_bytes;
                }
                dl_windows[ref.index].push_back(std::move(dl));
                ul_windows[ref.index].push_back(std::move(ul));
            }
        }

        // Scale simulated service back to real time and drain backlogs.
        for (int u = 0; u < n_users; ++u) {
            auto real_dl = static_cast<std::uint64_t>(
                static_cast<double>(dl_served[u]) * compression);
            auto real_ul = static_cast<std::uint64_t>(
                static_cast<double>(ul_served[u]) * compression);
            dl_backlog_[u] -= std::min(dl_backlog_[u], real_dl);
            ul_backlog_[u] -= std::min(ul_backlog_[u], real_ul);
        }

        // KPI roll-up.
        int harq_max = sc.radio.harq_max_tx;
        std::vector<double> new_loads(cells_.size(), 0.0);
        for (const auto& ref : cells_) {
            int connected = 0;
            for (const auto& att : attachments_)
                if (att.state == AttachState::Connected && att.serving_cell == ref.index)
                    ++connected;
            CellKpis kpis = cell_kpis(ref.cell->cell_id, connected,
                                      dl_windows[ref.index], ul_windows[ref.index],
                                      sim_window, harq_max);
            // sim-domain bytes scaled to the real step
            kpis.dl_bytes = static_cast<std::uint64_t>(
                static_cast<double>(kpis.dl_bytes) * compression);
            kpis.ul_bytes = static_cast<std::uint64_t>(
                static_cast<double>(kpis.ul_bytes) * compression);
            frame.cells[ref.index].kpis = kpis;
            new_loads[ref.index] = kpis.load;
        }

        double harq_factor = harq_goodput_factor(kBlerTarget, harq_max).factor;
        for (int u = 0; u < n_users; ++u) {
            const Attachment& att = attachments_[u];
            UserRecord rec;
            rec.user_id = u;
            rec.state = att.state;
            rec.serving_cell = att.serving_cell;
            rec.serving_beam = att.serving_beam;
            if (att.state == AttachState::Connected) {
                rec.rsrp = cov.rsrp_at(u, att.serving_cell, att.serving_beam);
                rec.sinr = dl_sinr[u];
                rec.dl_rate = static_cast<double>(dl_served[u]) * 8.0 * harq_factor / sim_window;
                rec.ul_rate = static_cast<double>(ul_served[u]) * 8.0 * harq_factor / sim_window;
                CellRecord& c = frame.cells[att.serving_cell];
                c.sum_rsrp += rec.rsrp;
                c.sum_sinr += rec.sinr;
                c.n_measured += 1;
            }
            frame.users.push_back(rec);
        }

        cell_loads_ = std::move(new_loads);
        finalize_frame(frame);
        return frame;
    }

    EpisodeSpec spec_;
    std::vector<CellRef> cells_;
    PathLossModel model_;
    std::vector<Trajectory> trajectories_;
    std::vector<TrafficTrace> traffic_;
    Action action_;
    std::vector<Attachment> attachments_;
    std::vector<std::uint64_t> dl_backlog_, ul_backlog_;
    std::vector<std::size_t> next_event_;
    std::vector<double> cell_loads_;
    int step_index_ = 0;
    bool done_ = false;
    bool active_ = false;
};

inline std::vector<KpiFrame> run_episode(const EpisodeSpec& spec, const Action& action) {
    Engine engine(spec);
    engine.reset();
    std::vector<KpiFrame> frames;
    frames.reserve(spec.horizon_steps);
    bool done = false;
    while (!done) {
        auto res = engine.step(action);
        frames.push_back(std::move(res.frame));
        done = res.done;
    }
    return frames;
}

inline std::vector<KpiFrame> run_protocol_stack_sim(const EpisodeSpec& spec,
                                                    const Action& action) {
    EpisodeSpec s = spec;
    s.mode = EmulatorMode::ProtocolStack;
    return run_episode(s, action);
}

inline std::vector<KpiFrame> run_coverage_sim(const EpisodeSpec& spec,
                                              const Action& action) {
    EpisodeSpec s = spec;
    s.mode = EmulatorMode::CoverageOnly;
    return run_episode(s, action);
}

struct LinkSpec {
    std::string cell_id;
    double x = 0.0;
    double y = 0.0;
    GridSpec grid;
    MultipathProfile profile;
};

/// Link-level combination: large-scale budget from the radio module plus a
/// small-scale TDL draw, returned as an RE-level grid with the budget applied.
inline ChannelGrid run_link_channel_sim(const Scenario& sc, const LinkSpec& link) {
    if (!sc.region.contains(link.x, link.y))
        throw std::invalid_argument("run_link_channel_sim: position outside region");
    auto cells = all_cells(sc);
    const CellRef* ref = nullptr;
    for (const auto& c : cells)
        if (c.cell->cell_id == link.cell_id) ref = &c;
    if (!ref)
        throw std::invalid_argument("run_link_channel_sim: unknown cell '" +
                                    link.cell_id + "'");

    PathLossModel model = path_loss_model_for(sc);
    EvalPoint p{link.x, link.y, sc.population.ue_height, 0};
    LinkGeometry geo = link_geometry(*ref->site, p);
    ScenarioClass cls = sc.region.class_at(p.x, p.y);
    PathLossResult pl = path_loss(model, cls, geo.d3d, ref->cell->carrier_freq);
    double loss = pl.loss + model.clutter_extra(sc.region.clutter_at(p.x, p.y)) +
                  shadow_db(sc, model, p.x, p.y, ref->index);

    std::array<double, kBeamsPerCell> gains{};
    for (int bi = 0; bi < kBeamsPerCell; ++bi)
        gains[bi] = beam_gain(ref->cell->beams[bi], *ref->cell, geo.azimuth, geo.elevation);
    double gain = gains[best_beam(gains)];

    auto stream = rng_stream(sc.master_seed, "link", ref->index, 0);
    TapSet taps = draw_multipath(link.profile, ref->cell->n_tx_antennas,
                                 sc.population.ue_antennas, stream);
    ChannelGrid grid = freq_response(taps, link.grid);
    return apply_large_scale(grid, loss, gain);
}

}  // namespace cellsim
