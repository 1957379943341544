#pragma once

// Baseline black-box optimizer over the beam-parameter action space:
// coordinate-proposal simulated annealing with a geometric temperature
// schedule, plus an exhaustive grid evaluator used as the oracle on small
// search spaces. Objective: mean reward over one episode with the action
// held constant and user/traffic randomness frozen by the scenario seed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellsim/engine.hpp"
#include "cellsim/rng.hpp"

namespace cellsim {

enum class BeamParam : int { AzimuthOffset = 0, Tilt = 1, HBeamwidth = 2, VBeamwidth = 3 };

inline const char* to_string(BeamParam p) {
    switch (p) {
        case BeamParam::AzimuthOffset: return "azimuth_offset";
        case BeamParam::Tilt: return "electrical_tilt";
        case BeamParam::HBeamwidth: return "h_beamwidth";
        case BeamParam::VBeamwidth: return "v_beamwidth";
    }
    return "?";
}

struct ParamGrid {
    BeamParam param = BeamParam::Tilt;
    double min = 0.0;
    double max = 12.0;
    double step = 2.0;

    int n_values() const {
        return static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1;
    }
    double value(int i) const { return min + i * step; }
};

struct SearchSpec {
    std::vector<ParamGrid> params;
    // Coupled mode tunes one value per (cell, param) applied to all 8 beams;
    // per-beam mode tunes each beam independently.
    bool per_beam = false;
};

namespace detail {

inline double& beam_field(BeamConfig& b, BeamParam p) {
    switch (p) {
        case BeamParam::AzimuthOffset: return b.azimuth_offset;
        case BeamParam::Tilt: return b.electrical_tilt;
        case BeamParam::HBeamwidth: return b.h_beamwidth;
        case BeamParam::VBeamwidth: return b.v_beamwidth;
    }
    throw std::logic_error("beam_field: bad param");
}

}  // namespace detail

struct Evaluation {
    Action action;
    double reward = 0.0;
};

struct OptimizeResult {
    Action best_action;
    double best_reward = 0.0;
    std::vector<Evaluation> trace;
};

inline double episode_mean_reward(const EpisodeSpec& spec, const Action& action) {
    auto frames = run_episode(spec, action);
    double sum = 0.0;
    for (const auto& f : frames) sum += f.reward_value;
    return sum / static_cast<double>(frames.size());
}

/// Coordinate state of a coupled search: one grid index per (cell, param)
/// or per (cell, beam, param).
struct GridState {
    std::vector<std::string> cell_ids;
    std::vector<int> indices;  // grid index per coordinate
};

inline Action grid_state_to_action(const Scenario& sc, const SearchSpec& search,
                                   const GridState& state) {
    Action a = current_action(sc);
    int beams = search.per_beam ? kBeamsPerCell : 1;
    std::size_t coord = 0;
    for (const auto& cell_id : state.cell_ids) {
        for (int bi = 0; bi < beams; ++bi) {
            for (const auto& grid : search.params) {
                double v = grid.value(state.indices[coord++]);
                if (search.per_beam) {
                    detail::beam_field(a[cell_id][bi], grid.param) = v;
                } else {
                    for (auto& b : a[cell_id]) detail::beam_field(b, grid.param) = v;
                }
            }
        }
    }
    return a;
}

inline GridState initial_grid_state(const Scenario& sc, const SearchSpec& search) {
    if (search.params.empty())
        throw std::invalid_argument("optimize: empty search space");
    GridState st;
    for (const auto& ref : all_cells(sc)) st.cell_ids.push_back(ref.cell->cell_id);
    int beams = search.per_beam ? kBeamsPerCell : 1;
    // start at the grid point nearest the configured value
    for (const auto& ref : all_cells(sc)) {
        for (int bi = 0; bi < beams; ++bi) {
            for (const auto& grid : search.params) {
                BeamConfig b = ref.cell->beams[search.per_beam ? bi : 0];
                double v = detail::beam_field(b, grid.param);
                int i = static_cast<int>(std::lround((v - grid.min) / grid.step));
                st.indices.push_back(std::clamp(i, 0, grid.n_values() - 1));
            }
        }
    }
    return st;
}

/// Exhaustive grid evaluation; only sensible for small coupled spaces.
inline OptimizeResult exhaustive_search(const EpisodeSpec& spec, const SearchSpec& search) {
    GridState st = initial_grid_state(spec.scenario, search);
    std::size_t n_coords = st.indices.size();

    OptimizeResult result;
    std::vector<int> idx(n_coords, 0);
    bool first = true;
    while (true) {
        GridState cur = st;
        cur.indices = idx;
        Action a = grid_state_to_action(spec.scenario, search, cur);
        double r = episode_mean_reward(spec, a);
        result.trace.push_back({a, r});
        if (first || r > result.best_reward) {
            result.best_reward = r;
            result.best_action = a;
            first = false;
        }
        // odometer increment
        std::size_t c = 0;
        for (; c < n_coords; ++c) {
            const ParamGrid& g = search.params[c % search.params.size()];
            if (++idx[c] < g.n_values()) break;
            idx[c] = 0;
        }
        if (c == n_coords) break;
    }
    return result;
}

/// Simulated annealing over the grid: perturb one coordinate by one step,
/// geometric cooling, keep the best action seen.
inline OptimizeResult local_search_optimize(const EpisodeSpec& spec,
                                            const SearchSpec& search, int budget,
                                            std::uint64_t seed = 0) {
    if (budget < 1)
        throw std::invalid_argument("local_search_optimize: budget must be >= 1");
    GridState st = initial_grid_state(spec.scenario, search);
    auto stream = rng_stream(spec.scenario.master_seed ^ seed, "anneal", seed, 0);

    OptimizeResult result;
    Action current = grid_state_to_action(spec.scenario, search, st);
    double current_reward = episode_mean_reward(spec, current);
    result.trace.push_back({current, current_reward});
    result.best_action = current;
    result.best_reward = current_reward;

    double weight_sum = spec.weights.w_rsrp + spec.weights.w_sinr + spec.weights.w_users +
                        spec.weights.w_traffic + spec.weights.w_rate;
    double t0 = 0.05 * std::max(weight_sum, 1e-6);
    double t_end = 1e-3 * t0;
    double decay = budget > 1 ? std::pow(t_end / t0, 1.0 / (budget - 1)) : 1.0;

    double temp = t0;
    for (int it = 1; it < budget; ++it, temp *= decay) {
        GridState proposal = st;
        std::size_t coord = stream.uniform_int(proposal.indices.size());
        const ParamGrid& grid = search.params[coord % search.params.size()];
        int dir = stream.uniform() < 0.5 ? -1 : 1;
        int next = std::clamp(proposal.indices[coord] + dir, 0, grid.n_values() - 1);
        if (next == proposal.indices[coord])
            next = std::clamp(proposal.indices[coord] - dir, 0, grid.n_values() - 1);
        proposal.indices[coord] = next;

        Action a = grid_state_to_action(spec.scenario, search, proposal);
        double r = episode_mean_reward(spec, a);
        result.trace.push_back({a, r});
        if (r > result.best_reward) {
            result.best_reward = r;
            result.best_action = a;
        }
        if (r >= current_reward ||
            stream.uniform() < std::exp((r - current_reward) / temp)) {
            st = proposal;
            current_reward = r;
        }
    }
    return result;
}

}  // namespace cellsim
