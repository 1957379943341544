#pragma once

// The immutable simulation world: region raster, sites/cells/beams, user
// population and radio constants. Validated once at load, read-only after.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellsim {

enum class ScenarioClass : std::uint8_t { Indoor = 0, UMi = 1, UMa = 2 };

inline const char* to_string(ScenarioClass c) {
    switch (c) {
        case ScenarioClass::Indoor: return "Indoor";
        case ScenarioClass::UMi: return "UMi";
        case ScenarioClass::UMa: return "UMa";
    }
    return "?";
}

class ValidationError : public std::runtime_error {
  public:
    ValidationError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

struct Region {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double cell_size = 50.0;  // meters
    int width = 1;
    int height = 1;
    std::vector<int> clutter;                  // row-major, height x width
    std::vector<ScenarioClass> scenario_class; // row-major, height x width

    double width_m() const { return width * cell_size; }
    double height_m() const { return height * cell_size; }

    bool contains(double x, double y) const {
        return x >= 0.0 && x <= width_m() && y >= 0.0 && y <= height_m();
    }

    /// Row-major raster index of the grid cell containing (x, y), clamped.
    int grid_index(double x, double y) const {
        int col = static_cast<int>(x / cell_size);
        int row = static_cast<int>(y / cell_size);
        if (col < 0) col = 0;
        if (col >= width) col = width - 1;
        if (row < 0) row = 0;
        if (row >= height) row = height - 1;
        return row * width + col;
    }

    int clutter_at(double x, double y) const { return clutter[grid_index(x, y)]; }
    ScenarioClass class_at(double x, double y) const {
        return scenario_class[grid_index(x, y)];
    }
};

inline constexpr int kBeamsPerCell = 8;

struct BeamLimits {
    double lo;
    double hi;
};
inline constexpr BeamLimits kAzimuthOffsetRange{-60.0, 60.0};
inline constexpr BeamLimits kTiltRange{0.0, 15.0};
inline constexpr BeamLimits kHBeamwidthRange{15.0, 110.0};
inline constexpr BeamLimits kVBeamwidthRange{3.0, 30.0};

struct BeamConfig {
    double azimuth_offset = 0.0;  // degrees, [-60, 60]
    double electrical_tilt = 6.0; // degrees, [0, 15]
    double h_beamwidth = 65.0;    // degrees, [15, 110]
    double v_beamwidth = 10.0;    // degrees, [3, 30]

    bool operator==(const BeamConfig&) const = default;
};

/// Default SSB sweep: eight beams fanned across the sector.
inline std::vector<BeamConfig> default_beams() {
    std::vector<BeamConfig> beams(kBeamsPerCell);
    for (int i = 0; i < kBeamsPerCell; ++i) {
        beams[i].azimuth_offset = -52.5 + 15.0 * i;
        beams[i].electrical_tilt = 6.0;
        beams[i].h_beamwidth = 30.0;
        beams[i].v_beamwidth = 10.0;
    }
    return beams;
}

struct CellConfig {
    std::string cell_id;
    double mechanical_azimuth = 0.0;  // degrees [0, 360)
    double tx_power = 43.0;           // dBm total
    double carrier_freq = 3.5;        // GHz
    double bandwidth = 100.0;         // MHz
    int n_tx_antennas = 32;
    std::vector<BeamConfig> beams;    // exactly kBeamsPerCell
    double max_gain = 17.0;           // dBi
};

struct SiteConfig {
    std::string site_id;
    double x = 0.0;  // local meters
    double y = 0.0;
    double antenna_height = 25.0;  // meters
    std::vector<CellConfig> cells;
};

struct TrafficProfile {
    std::string name = "default";
    double session_rate = 2.0;          // sessions/hour
    double mean_session_packets = 50.0;
    double packet_size_log_mu = 6.9;    // lognormal of bytes
    double packet_size_log_sigma = 1.0;
    double dl_fraction = 0.8;
    double fraction = 1.0;              // population share
};

struct SpeedClass {
    double speed = 1.5;     // m/s
    double fraction = 1.0;
};

struct PopulationSpec {
    int n_users = 0;
    std::vector<SpeedClass> speed_classes{{1.5, 1.0}};
    std::vector<TrafficProfile> traffic_profiles{{}};
    double ue_noise_figure = 9.0;  // dB
    double ue_height = 1.5;        // meters
    int ue_antennas = 2;
};

struct RadioConstants {
    double noise_density = -174.0;  // dBm/Hz, thermal, fixed
    double re_bandwidth = 30e3;     // Hz (subcarrier spacing)
    int rb_per_cell = 273;
    double static_load = 1.0;       // interference load when no stack runs
    double q_rxlevmin = -110.0;     // dBm access threshold
    int max_users_per_cell = 400;
    double ho_hysteresis = 3.0;     // dB
    double ho_ttt = 0.32;           // seconds (scaled to sim tick)
    int tti_budget = 100;           // representative TTIs per step
    int harq_max_tx = 4;
    double p0 = -90.0;              // dBm, UL open-loop target
    double ul_alpha = 0.8;
    double p_max = 23.0;            // dBm UE
};

struct Scenario {
    Region region;
    std::vector<SiteConfig> sites;
    PopulationSpec population;
    RadioConstants radio;
    std::uint64_t master_seed = 1;
    // per scenario class, indexed by ScenarioClass
    std::array<double, 3> shadowing_sigma{4.0, 4.0, 6.0};

    int total_cells() const {
        int n = 0;
        for (const auto& s : sites) n += static_cast<int>(s.cells.size());
        return n;
    }
};

/// Flat view of one cell with its site geometry, for iteration.
struct CellRef {
    const SiteConfig* site;
    const CellConfig* cell;
    int index;  // global cell index, site-major order
};

inline std::vector<CellRef> all_cells(const Scenario& sc) {
    std::vector<CellRef> out;
    int idx = 0;
    for (const auto& site : sc.sites)
        for (const auto& cell : site.cells) out.push_back({&site, &cell, idx++});
    return out;
}

/// One steerable-parameter set per cell: cell_id -> 8 BeamConfig entries.
using Action = std::map<std::string, std::vector<BeamConfig>>;

inline Action current_action(const Scenario& sc) {
    Action a;
    for (const auto& site : sc.sites)
        for (const auto& cell : site.cells) a[cell.cell_id] = cell.beams;
    return a;
}

inline void validate_beam(const BeamConfig& b, const std::string& path) {
    auto check = [&](double v, BeamLimits lim, const char* field) {
        if (!(v >= lim.lo && v <= lim.hi))
            throw ValidationError(path + "." + field, "value out of range [" +
                                  std::to_string(lim.lo) + ", " +
                                  std::to_string(lim.hi) + "]");
    };
    check(b.azimuth_offset, kAzimuthOffsetRange, "azimuth_offset");
    check(b.electrical_tilt, kTiltRange, "electrical_tilt");
    check(b.h_beamwidth, kHBeamwidthRange, "h_beamwidth");
    check(b.v_beamwidth, kVBeamwidthRange, "v_beamwidth");
}

/// Checks an action covers every cell exactly once with in-range beams.
/// Throws ValidationError naming the offending cell/beam/field.
inline void validate_action(const Scenario& sc, const Action& a) {
    std::size_t covered = 0;
    for (const auto& site : sc.sites) {
        for (const auto& cell : site.cells) {
            auto it = a.find(cell.cell_id);
            if (it == a.end())
                throw ValidationError("action", "missing cell '" + cell.cell_id + "'");
            if (it->second.size() != kBeamsPerCell)
                throw ValidationError("action." + cell.cell_id + ".beams",
                                      "exactly 8 beams required");
            for (std::size_t bi = 0; bi < it->second.size(); ++bi)
                validate_beam(it->second[bi], "action." + cell.cell_id + ".beams[" +
                              std::to_string(bi) + "]");
            ++covered;
        }
    }
    if (covered != a.size())
        throw ValidationError("action", "contains unknown cell ids");
}

inline void validate(const Scenario& sc) {
    const Region& r = sc.region;
    if (r.width < 1 || r.height < 1)
        throw ValidationError("region", "width and height must be >= 1");
    if (!(r.cell_size > 0.0))
        throw ValidationError("region.cell_size", "must be > 0");
    auto n = static_cast<std::size_t>(r.width) * r.height;
    if (r.clutter.size() != n)
        throw ValidationError("region.clutter", "raster must be height x width");
    if (r.scenario_class.size() != n)
        throw ValidationError("region.scenario_class", "raster must be height x width");
    for (auto c : r.scenario_class)
        if (c != ScenarioClass::Indoor && c != ScenarioClass::UMi &&
            c != ScenarioClass::UMa)
            throw ValidationError("region.scenario_class", "unknown class code");

    if (sc.sites.empty()) throw ValidationError("sites", "at least 1 site required");
    std::set<std::string> ids;
    for (std::size_t si = 0; si < sc.sites.size(); ++si) {
        const auto& site = sc.sites[si];
        std::string spath = "sites[" + std::to_string(si) + "]";
        if (!(site.antenna_height > 0.0))
            throw ValidationError(spath + ".antenna_height", "must be > 0");
        if (!r.contains(site.x, site.y))
            throw ValidationError(spath + ".position", "outside region bounds");
        for (std::size_t ci = 0; ci < site.cells.size(); ++ci) {
            const auto& cell = site.cells[ci];
            std::string cpath = spath + ".cells[" + std::to_string(ci) + "]";
            if (!ids.insert(cell.cell_id).second)
                throw ValidationError(cpath + ".cell_id",
                                      "duplicate cell_id '" + cell.cell_id + "'");
            if (cell.beams.size() != kBeamsPerCell)
                throw ValidationError(cpath + ".beams", "exactly 8 beams required");
            if (!(cell.tx_power >= 0.0 && cell.tx_power <= 53.0))
                throw ValidationError(cpath + ".tx_power", "must be in [0, 53] dBm");
            if (!(cell.carrier_freq > 0.0))
                throw ValidationError(cpath + ".carrier_freq", "must be > 0");
            if (!(cell.mechanical_azimuth >= 0.0 && cell.mechanical_azimuth < 360.0))
                throw ValidationError(cpath + ".mechanical_azimuth",
                                      "must be in [0, 360)");
            for (std::size_t bi = 0; bi < cell.beams.size(); ++bi)
                validate_beam(cell.beams[bi], cpath + ".beams[" + std::to_string(bi) + "]");
        }
    }
    if (sc.total_cells() < 1) throw ValidationError("sites", "no cells defined");

    const auto& pop = sc.population;
    if (pop.n_users < 0) throw ValidationError("population.n_users", "must be >= 0");
    auto check_fractions = [](double sum, const std::string& path) {
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError(path, "fractions must sum to 1");
    };
    if (!pop.speed_classes.empty()) {
        double s = 0.0;
        for (const auto& c : pop.speed_classes) s += c.fraction;
        check_fractions(s, "population.speed_classes");
    } else if (pop.n_users > 0) {
        throw ValidationError("population.speed_classes", "empty with users present");
    }
    if (!pop.traffic_profiles.empty()) {
        double s = 0.0;
        for (const auto& p : pop.traffic_profiles) {
            s += p.fraction;
            if (!(p.session_rate >= 0.0))
                throw ValidationError("population.traffic_profiles", "negative session_rate");
            if (!(p.mean_session_packets > 0.0))
                throw ValidationError("population.traffic_profiles",
                                      "mean_session_packets must be > 0");
            if (!(p.dl_fraction >= 0.0 && p.dl_fraction <= 1.0))
                throw ValidationError("population.traffic_profiles",
                                      "dl_fraction must be in [0, 1]");
        }
        check_fractions(s, "population.traffic_profiles");
    } else if (pop.n_users > 0) {
        throw ValidationError("population.traffic_profiles", "empty with users present");
    }
}

}  // namespace cellsim
