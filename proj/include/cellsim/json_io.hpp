#pragma once

// Canonical JSON forms of frames and actions. Every output channel (CLI
// files, wire protocol) serializes through these functions, so identical
// episodes produce byte-identical records everywhere.

#include <json.hpp>

#include "cellsim/engine.hpp"
#include "cellsim/scenario_io.hpp"

namespace cellsim {

inline json action_to_json(const Action& a) {
    json out = json::object();
    for (const auto& [cell_id, beams] : a) {
        json jbeams = json::array();
        for (const auto& b : beams) jbeams.push_back(beam_to_json(b));
        out[cell_id] = std::move(jbeams);
    }
    return out;
}

inline Action action_from_json(const json& j) {
    Action a;
    for (const auto& [cell_id, jbeams] : j.items()) {
        std::vector<BeamConfig> beams;
        for (const auto& jb : jbeams) beams.push_back(beam_from_json(jb));
        a[cell_id] = std::move(beams);
    }
    return a;
}

inline const char* to_string(AttachState s) {
    switch (s) {
        case AttachState::Idle: return "idle";
        case AttachState::Connected: return "connected";
        case AttachState::Blocked: return "blocked";
    }
    return "?";
}

inline json frame_to_json(const KpiFrame& frame, bool include_users = false) {
    json jcells = json::array();
    for (const auto& c : frame.cells) {
        jcells.push_back({{"cell_id", c.kpis.cell_id},
                          {"connected_users", c.kpis.connected_users},
                          {"load", c.kpis.load},
                          {"dl_rate", c.kpis.dl_rate},
                          {"ul_rate", c.kpis.ul_rate},
                          {"dl_bytes", c.kpis.dl_bytes},
                          {"ul_bytes", c.kpis.ul_bytes},
                          {"sum_rsrp", c.sum_rsrp},
                          {"sum_sinr", c.sum_sinr},
                          {"n_measured", c.n_measured}});
    }
    json out{{"step", frame.step},
             {"cells", std::move(jcells)},
             {"aggregates",
              {{"mean_rsrp", frame.aggregates.mean_rsrp},
               {"mean_sinr", frame.aggregates.mean_sinr},
               {"connected_users", frame.aggregates.connected_users},
               {"traffic_bytes", frame.aggregates.traffic_bytes},
               {"mean_rate", frame.aggregates.mean_rate}}},
             {"reward", frame.reward_value}};
    if (include_users) {
        json jusers = json::array();
        for (const auto& u : frame.users) {
            jusers.push_back({{"user_id", u.user_id},
                              {"state", to_string(u.state)},
                              {"serving_cell", u.serving_cell},
                              {"serving_beam", u.serving_beam},
                              {"rsrp", u.rsrp},
                              {"sinr", u.sinr},
                              {"dl_rate", u.dl_rate},
                              {"ul_rate", u.ul_rate}});
        }
        out["users"] = std::move(jusers);
    }
    return out;
}

inline std::string frame_line(const KpiFrame& frame, bool include_users = false) {
    return frame_to_json(frame, include_users).dump();
}

inline std::uint64_t action_hash(const Action& a) {
    return detail::fnv1a(action_to_json(a).dump());
}

inline json weights_to_json(const RewardWeights& w) {
    auto anchor = [](const MetricAnchor& a) { return json{{"lo", a.lo}, {"hi", a.hi}}; };
    return json{{"w_rsrp", w.w_rsrp},       {"w_sinr", w.w_sinr},
                {"w_users", w.w_users},     {"w_traffic", w.w_traffic},
                {"w_rate", w.w_rate},       {"rsrp", anchor(w.rsrp)},
                {"sinr", anchor(w.sinr)},   {"users", anchor(w.users)},
                {"traffic", anchor(w.traffic)}, {"rate", anchor(w.rate)}};
}

inline RewardWeights weights_from_json(const json& j, RewardWeights w) {
    w.w_rsrp = detail::get_or(j, "w_rsrp", w.w_rsrp);
    w.w_sinr = detail::get_or(j, "w_sinr", w.w_sinr);
    w.w_users = detail::get_or(j, "w_users", w.w_users);
    w.w_traffic = detail::get_or(j, "w_traffic", w.w_traffic);
    w.w_rate = detail::get_or(j, "w_rate", w.w_rate);
    auto anchor = [&](const char* key, MetricAnchor& a) {
        if (auto it = j.find(key); it != j.end()) {
            a.lo = detail::get_or(*it, "lo", a.lo);
            a.hi = detail::get_or(*it, "hi", a.hi);
        }
    };
    anchor("rsrp", w.rsrp);
    anchor("sinr", w.sinr);
    anchor("users", w.users);
    anchor("traffic", w.traffic);
    anchor("rate", w.rate);
    return w;
}

/// Episode spec from JSON: scenario inline ("scenario") or by file path
/// ("scenario_path"), plus horizon/step/mode/weights overrides.
inline EpisodeSpec episode_spec_from_json(const json& j,
                                          const std::filesystem::path& base_dir = {}) {
    Scenario sc;
    if (auto it = j.find("scenario"); it != j.end()) {
        sc = scenario_from_json(*it, base_dir);
    } else if (auto p = j.find("scenario_path"); p != j.end()) {
        std::filesystem::path path = p->get<std::string>();
        if (path.is_relative()) path = base_dir / path;
        sc = load_scenario(path);
    } else {
        throw ParseError("episode spec: need 'scenario' or 'scenario_path'");
    }
    EpisodeSpec spec;
    spec.horizon_steps = detail::get_or(j, "horizon_steps", 1);
    spec.step_seconds = detail::get_or(j, "step_seconds", 300.0);
    std::string mode = detail::get_or<std::string>(j, "mode", "stack");
    if (mode == "stack") spec.mode = EmulatorMode::ProtocolStack;
    else if (mode == "coverage") spec.mode = EmulatorMode::CoverageOnly;
    else throw ParseError("episode spec: unknown mode '" + mode + "'");
    spec.shadowing = detail::get_or(j, "shadowing", true);
    std::string sched = detail::get_or<std::string>(j, "scheduler", "pf");
    if (sched == "pf") spec.scheduler = SchedulerPolicy::ProportionalFair;
    else if (sched == "rr") spec.scheduler = SchedulerPolicy::RoundRobin;
    else throw ParseError("episode spec: unknown scheduler '" + sched + "'");
    spec.weights = default_weights(sc, spec.step_seconds);
    if (auto it = j.find("weights"); it != j.end())
        spec.weights = weights_from_json(*it, spec.weights);
    if (auto it = j.find("seed_override"); it != j.end())
        sc.master_seed = it->get<std::uint64_t>();
    spec.scenario = std::move(sc);
    return spec;
}

inline json episode_spec_to_json(const EpisodeSpec& spec) {
    return json{{"scenario", scenario_to_json(spec.scenario)},
                {"horizon_steps", spec.horizon_steps},
                {"step_seconds", spec.step_seconds},
                {"mode", spec.mode == EmulatorMode::ProtocolStack ? "stack" : "coverage"},
                {"scheduler", spec.scheduler == SchedulerPolicy::ProportionalFair ? "pf" : "rr"},
                {"shadowing", spec.shadowing},
                {"weights", weights_to_json(spec.weights)}};
}

}  // namespace cellsim
