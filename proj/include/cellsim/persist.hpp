#pragma once

// Run persistence: KPI frames as JSON-lines, optimizer traces as CSV, a
// manifest tying outputs to the scenario config by content hash, and
// heatmap exports over the region grid.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cellsim/json_io.hpp"
#include "cellsim/optimize.hpp"

namespace cellsim {

inline constexpr const char* kEngineVersion = "0.1.0";

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string scenario_file_hash(const std::filesystem::path& scenario_path) {
    return hex64(detail::fnv1a(read_file_bytes(scenario_path)));
}

struct RunManifest {
    std::string run_id;
    std::string scenario_path;
    std::string scenario_hash;
    json spec_summary;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> output_files;
    std::string engine_version = kEngineVersion;
};

inline std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline json manifest_to_json(const RunManifest& m) {
    return json{{"run_id", m.run_id},
                {"scenario_path", m.scenario_path},
                {"scenario_hash", m.scenario_hash},
                {"spec", m.spec_summary},
                {"started_at", m.started_at},
                {"finished_at", m.finished_at},
                {"output_files", m.output_files},
                {"engine_version", m.engine_version}};
}

inline void write_frames(const std::vector<KpiFrame>& frames,
                         const std::filesystem::path& path, bool include_users = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    for (const auto& f : frames) out << frame_line(f, include_users) << '\n';
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << manifest_to_json(m).dump(2) << '\n';
}

/// Re-reads the scenario named in a manifest and checks the content hash.
inline bool verify_manifest(const std::filesystem::path& manifest_path) {
    json doc = json::parse(read_file_bytes(manifest_path));
    std::filesystem::path scenario = doc.at("scenario_path").get<std::string>();
    if (scenario.is_relative()) scenario = manifest_path.parent_path() / scenario;
    return scenario_file_hash(scenario) == doc.at("scenario_hash").get<std::string>();
}

inline void write_trace_csv(const std::vector<Evaluation>& trace,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << "index,action_hash,reward\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << i << ',' << hex64(action_hash(trace[i].action)) << ','
            << std::setprecision(17) << trace[i].reward << '\n';
}

enum class HeatmapMetric { Rsrp, Sinr };

/// Serving RSRP (dBm) or SINR (dB) over the region raster, one value per
/// grid cell, CSV with height rows by width columns. beam_cell/beam_id < 0
/// selects the serving value; otherwise that specific (cell, beam) map.
inline void write_heatmap_csv(const Scenario& sc, const Action& action,
                              HeatmapMetric metric, const std::filesystem::path& path,
                              int beam_cell = -1, int beam_id = -1) {
    PathLossModel model = path_loss_model_for(sc);
    std::vector<EvalPoint> points;
    for (int row = 0; row < sc.region.height; ++row)
        for (int col = 0; col < sc.region.width; ++col)
            points.push_back({(col + 0.5) * sc.region.cell_size,
                              (row + 0.5) * sc.region.cell_size,
                              sc.population.ue_height, row * sc.region.width + col});
    std::vector<double> loads(sc.total_cells(), sc.radio.static_load);
    CoverageFrame frame = coverage_frame(sc, model, points, action, 0, loads);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << std::setprecision(10);
    for (int row = 0; row < sc.region.height; ++row) {
        for (int col = 0; col < sc.region.width; ++col) {
            int pi = row * sc.region.width + col;
            double v;
            if (beam_cell >= 0 && beam_id >= 0)
                v = frame.rsrp_at(pi, beam_cell, beam_id);
            else if (metric == HeatmapMetric::Rsrp)
                v = frame.rsrp_at(pi, frame.serving_cell[pi], frame.serving_beam[pi]);
            else
                v = frame.sinr_db[pi];
            out << v << (col + 1 == sc.region.width ? "" : ",");
        }
        out << '\n';
    }
}

}  // namespace cellsim
