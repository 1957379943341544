#pragma once

// Large-scale channel emulation: steerable sub-beam gain synthesis,
// log-distance path loss per scenario class with an affine calibration hook,
// per-point RSRP/SINR, strongest-beam selection and full coverage frames.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cellsim/geometry.hpp"
#include "cellsim/rng.hpp"
#include "cellsim/scenario.hpp"

namespace cellsim {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct PathLossCoefficients {
    double intercept;   // dB at 1 m / 1 GHz
    double dist_slope;  // per decade of distance (alpha)
    double freq_slope;  // per decade of frequency (gamma)
    double sigma;       // shadowing std dev, dB
};

struct PathLossModel {
    // Indexed by ScenarioClass {Indoor, UMi, UMa}.
    std::array<PathLossCoefficients, 3> coeffs{{
        {32.4, 1.73, 2.0, 4.0},  // Indoor
        {32.4, 2.1, 2.0, 4.0},   // UMi
        {28.0, 2.2, 2.0, 6.0},   // UMa
    }};
    double cal_scale = 1.0;   // a
    double cal_offset = 0.0;  // b
    // Extra loss per clutter class code; codes past the end use the last entry.
    std::vector<double> clutter_loss{0.0, 15.0};

    double clutter_extra(int code) const {
        if (clutter_loss.empty() || code < 0) return 0.0;
        auto i = std::min<std::size_t>(code, clutter_loss.size() - 1);
        return clutter_loss[i];
    }
};

inline PathLossModel path_loss_model_for(const Scenario& sc) {
    PathLossModel m;
    for (int i = 0; i < 3; ++i) m.coeffs[i].sigma = sc.shadowing_sigma[i];
    return m;
}

/// Parabolic-in-dB sub-beam pattern with 30 dB per-plane and total floors.
/// Angles in degrees; az_to_point is compass azimuth from the antenna,
/// el_to_point is positive below the horizontal (downtilt direction).
inline double beam_gain(const BeamConfig& beam, const CellConfig& cell,
                        double az_to_point, double el_to_point) {
    double dphi = wrap_deg(az_to_point - cell.mechanical_azimuth - beam.azimuth_offset);
    double dtheta = el_to_point - beam.electrical_tilt;
    double ah = std::min(12.0 * (dphi / beam.h_beamwidth) * (dphi / beam.h_beamwidth), 30.0);
    double av = std::min(12.0 * (dtheta / beam.v_beamwidth) * (dtheta / beam.v_beamwidth), 30.0);
    return cell.max_gain - std::min(ah + av, 30.0);
}

struct PathLossResult {
    double loss = 0.0;    // calibrated, dB (no shadowing)
    double shadow = 0.0;  // dB
};

/// Log-distance loss with affine calibration applied. Shadowing is drawn
/// from the supplied stream when present, Normal(0, sigma^2).
inline PathLossResult path_loss(const PathLossModel& model, ScenarioClass cls,
                                double d3d, double freq_ghz,
                                RngStream* shadow_stream = nullptr) {
    if (d3d < 1.0)
        throw std::invalid_argument("path_loss: d3d must be >= 1 m");
    const auto& c = model.coeffs[static_cast<int>(cls)];
    double pl = c.intercept + c.dist_slope * 10.0 * std::log10(d3d) +
                c.freq_slope * 10.0 * std::log10(freq_ghz);
    PathLossResult r;
    r.loss = model.cal_scale * pl + model.cal_offset;
    if (shadow_stream) r.shadow = shadow_stream->normal(0.0, c.sigma);
    return r;
}

/// Per-RE received power. Total cell power is split evenly across all REs
/// of the carrier (rb_per_cell * 12 subcarriers).
inline double rsrp(double tx_power_dbm, int total_res, double gain_dbi,
                   double loss_db, double shadow_db = 0.0) {
    return tx_power_dbm - linear_to_db(static_cast<double>(total_res)) + gain_dbi -
           loss_db - shadow_db;
}

/// Index of the strongest of exactly 8 per-beam RSRP values; ties go to the
/// lowest beam id.
inline int best_beam(const std::array<double, kBeamsPerCell>& per_beam_rsrp) {
    int best = 0;
    for (int i = 0; i < kBeamsPerCell; ++i) {
        if (!std::isfinite(per_beam_rsrp[i]))
            throw std::invalid_argument("best_beam: non-finite RSRP");
        if (per_beam_rsrp[i] > per_beam_rsrp[best]) best = i;
    }
    return best;
}

/// Load-weighted SINR in dB. Interferer powers are weighted by their cells'
/// load factors in the linear domain.
inline double sinr(double serving_rsrp_dbm, const std::vector<double>& interferers_dbm,
                   double noise_per_re_dbm, const std::vector<double>& load_factors) {
    if (interferers_dbm.size() != load_factors.size())
        throw std::invalid_argument("sinr: interferers/load_factors length mismatch");
    double denom = db_to_linear(noise_per_re_dbm);
    for (std::size_t i = 0; i < interferers_dbm.size(); ++i)
        denom += load_factors[i] * db_to_linear(interferers_dbm[i]);
    return linear_to_db(db_to_linear(serving_rsrp_dbm) / denom);
}

inline double noise_per_re_dbm(const Scenario& sc) {
    return sc.radio.noise_density + linear_to_db(sc.radio.re_bandwidth) +
           sc.population.ue_noise_figure;
}

struct EvalPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 1.5;
    int point_id = 0;
};

struct CoverageFrame {
    int step = 0;
    int n_points = 0;
    int n_cells = 0;
    // rsrp[point][cell][beam], flattened
    std::vector<double> rsrp_dbm;
    std::vector<int> serving_cell;  // per point, global cell index
    std::vector<int> serving_beam;  // per point
    std::vector<double> sinr_db;    // per point, at the serving beam

    double rsrp_at(int point, int cell, int beam) const {
        return rsrp_dbm[(static_cast<std::size_t>(point) * n_cells + cell) * kBeamsPerCell + beam];
    }
};

/// Geometry from one site antenna to one evaluation point.
struct LinkGeometry {
    double d2d = 0.0;
    double d3d = 1.0;
    double azimuth = 0.0;    // compass degrees
    double elevation = 0.0;  // degrees below horizontal
};

inline LinkGeometry link_geometry(const SiteConfig& site, const EvalPoint& p) {
    LinkGeometry g;
    double dx = p.x - site.x, dy = p.y - site.y;
    g.d2d = std::hypot(dx, dy);
    double dh = site.antenna_height - p.z;
    g.d3d = std::max(std::hypot(g.d2d, dh), 1.0);
    g.azimuth = azimuth_deg({site.x, site.y}, {p.x, p.y});
    g.elevation = std::atan2(dh, std::max(g.d2d, 1e-9)) / kDegToRad;
    return g;
}

/// Frozen per-(grid cell, cell) shadowing draw. Identical across steps so
/// repeated frames at the same location reproduce identical values.
inline double shadow_db(const Scenario& sc, const PathLossModel& model,
                        double x, double y, int cell_index) {
    int gi = sc.region.grid_index(x, y);
    const auto& c = model.coeffs[static_cast<int>(sc.region.class_at(x, y))];
    auto stream = rng_stream(sc.master_seed, "shadow", gi, cell_index);
    return stream.normal(0.0, c.sigma);
}

/// Full per-point, per-cell, per-beam coverage evaluation. Serving cell/beam
/// is the global RSRP argmax; interference comes from every non-serving
/// cell's strongest beam, weighted by that cell's load factor.
inline CoverageFrame coverage_frame(const Scenario& sc, const PathLossModel& model,
                                    const std::vector<EvalPoint>& points,
                                    const Action& action, int step,
                                    const std::vector<double>& cell_loads,
                                    bool shadowing = true) {
    if (points.empty())
        throw std::invalid_argument("coverage_frame: points must be non-empty");
    auto cells = all_cells(sc);
    if (cell_loads.size() != cells.size())
        throw std::invalid_argument("coverage_frame: cell_loads size mismatch");

    CoverageFrame frame;
    frame.step = step;
    frame.n_points = static_cast<int>(points.size());
    frame.n_cells = static_cast<int>(cells.size());
    frame.rsrp_dbm.resize(points.size() * cells.size() * kBeamsPerCell);
    frame.serving_cell.assign(points.size(), 0);
    frame.serving_beam.assign(points.size(), 0);
    frame.sinr_db.assign(points.size(), 0.0);

    double noise = noise_per_re_dbm(sc);
    int total_res = sc.radio.rb_per_cell * 12;

    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const EvalPoint& p = points[pi];
        double best_rsrp = -std::numeric_limits<double>::infinity();
        std::vector<double> cell_best(cells.size());
        for (const auto& ref : cells) {
            LinkGeometry geo = link_geometry(*ref.site, p);
            ScenarioClass cls = sc.region.class_at(p.x, p.y);
            PathLossResult pl = path_loss(model, cls, geo.d3d, ref.cell->carrier_freq);
            double loss = pl.loss + model.clutter_extra(sc.region.clutter_at(p.x, p.y));
            double shadow = shadowing ? shadow_db(sc, model, p.x, p.y, ref.index) : 0.0;
            const auto& beams = action.at(ref.cell->cell_id);
            double cbest = -std::numeric_limits<double>::infinity();
            for (int bi = 0; bi < kBeamsPerCell; ++bi) {
                double g = beam_gain(beams[bi], *ref.cell, geo.azimuth, geo.elevation);
                double v = rsrp(ref.cell->tx_power, total_res, g, loss, shadow);
                frame.rsrp_dbm[(pi * cells.size() + ref.index) * kBeamsPerCell + bi] = v;
                if (v > cbest) cbest = v;
                if (v > best_rsrp) {
                    best_rsrp = v;
                    frame.serving_cell[pi] = ref.index;
                    frame.serving_beam[pi] = bi;
                }
            }
            cell_best[ref.index] = cbest;
        }
        std::vector<double> interferers, loads;
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            if (static_cast<int>(ci) == frame.serving_cell[pi]) continue;
            interferers.push_back(cell_best[ci]);
            loads.push_back(cell_loads[ci]);
        }
        frame.sinr_db[pi] = sinr(best_rsrp, interferers, noise, loads);
    }
    return frame;
}

struct LossMeasurement {
    double d3d = 1.0;
    double freq_ghz = 1.0;
    ScenarioClass cls = ScenarioClass::UMa;
    double observed_loss = 0.0;  // dB
};

/// Least-squares affine calibration: fits (a, b) minimizing
/// sum (a * PL_model + b - observed)^2 over the measurements.
inline PathLossModel calibrate(const PathLossModel& model,
                               const std::vector<LossMeasurement>& measurements) {
    if (measurements.size() < 2)
        throw std::invalid_argument("calibrate: need at least 2 measurements");
    PathLossModel base = model;
    base.cal_scale = 1.0;
    base.cal_offset = 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    auto n = static_cast<double>(measurements.size());
    for (const auto& m : measurements) {
        double x = path_loss(base, m.cls, m.d3d, m.freq_ghz).loss;
        sx += x;
        sy += m.observed_loss;
        sxx += x * x;
        sxy += x * m.observed_loss;
    }
    double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-9 * n * std::max(sxx, 1.0))
        throw std::invalid_argument("calibrate: degenerate measurements "
                                    "(all model predictions identical)");
    PathLossModel out = model;
    out.cal_scale = (n * sxy - sx * sy) / det;
    out.cal_offset = (sy - out.cal_scale * sx) / n;
    if (!(out.cal_scale > 0.0))
        throw std::invalid_argument("calibrate: fitted scale not positive");
    return out;
}

}  // namespace cellsim
