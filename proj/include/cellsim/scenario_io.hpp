#pragma once

// Scenario configuration ingestion: a single JSON document with top-level
// keys "region", "sites", "population", "radio", "seed". The clutter raster
// may be inline or referenced as a CSV file. See docs in README.

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cellsim/scenario.hpp"

namespace cellsim {

using json = nlohmann::ordered_json;

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline ScenarioClass class_from_string(const std::string& s, const std::string& path) {
    if (s == "Indoor") return ScenarioClass::Indoor;
    if (s == "UMi") return ScenarioClass::UMi;
    if (s == "UMa") return ScenarioClass::UMa;
    throw ValidationError(path, "unknown scenario class '" + s + "'");
}

inline std::vector<int> read_clutter_csv(const std::filesystem::path& file,
                                         int width, int height) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open clutter CSV: " + file.string());
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(width) * height);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    }
    if (out.size() != static_cast<std::size_t>(width) * height)
        throw ValidationError("region.clutter", "CSV raster must be height x width");
    return out;
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
    if (auto it = j.find(key); it != j.end()) return it->get<T>();
    return def;
}

}  // namespace detail

inline BeamConfig beam_from_json(const json& j) {
    BeamConfig b;
    b.azimuth_offset = detail::get_or(j, "azimuth_offset", b.azimuth_offset);
    b.electrical_tilt = detail::get_or(j, "electrical_tilt", b.electrical_tilt);
    b.h_beamwidth = detail::get_or(j, "h_beamwidth", b.h_beamwidth);
    b.v_beamwidth = detail::get_or(j, "v_beamwidth", b.v_beamwidth);
    return b;
}

inline json beam_to_json(const BeamConfig& b) {
    return json{{"azimuth_offset", b.azimuth_offset},
                {"electrical_tilt", b.electrical_tilt},
                {"h_beamwidth", b.h_beamwidth},
                {"v_beamwidth", b.v_beamwidth}};
}

inline Scenario scenario_from_json(const json& doc,
                                   const std::filesystem::path& base_dir = {}) {
    Scenario sc;
    if (!doc.is_object()) throw ParseError("scenario document must be an object");

    const json& jr = doc.at("region");
    Region& r = sc.region;
    r.origin_lat = detail::get_or(jr, "origin_lat", 0.0);
    r.origin_lon = detail::get_or(jr, "origin_lon", 0.0);
    r.cell_size = detail::get_or(jr, "cell_size", 50.0);
    r.width = jr.at("width").get<int>();
    r.height = jr.at("height").get<int>();
    std::size_t n = static_cast<std::size_t>(std::max(r.width, 0)) *
                    static_cast<std::size_t>(std::max(r.height, 0));

    if (auto it = jr.find("clutter"); it != jr.end()) {
        for (const auto& row : *it)
            for (const auto& v : row) r.clutter.push_back(v.get<int>());
    } else if (auto f = jr.find("clutter_csv"); f != jr.end()) {
        r.clutter = detail::read_clutter_csv(base_dir / f->get<std::string>(),
                                             r.width, r.height);
    } else {
        r.clutter.assign(n, 0);
    }

    if (auto it = jr.find("scenario_class"); it != jr.end()) {
        if (it->is_string()) {
            r.scenario_class.assign(
                n, detail::class_from_string(it->get<std::string>(),
                                             "region.scenario_class"));
        } else {
            for (const auto& row : *it)
                for (const auto& v : row)
                    r.scenario_class.push_back(detail::class_from_string(
                        v.get<std::string>(), "region.scenario_class"));
        }
    } else {
        r.scenario_class.assign(n, ScenarioClass::UMa);
    }

    for (const auto& js : doc.at("sites")) {
        SiteConfig site;
        site.site_id = js.at("site_id").get<std::string>();
        site.x = js.at("x").get<double>();
        site.y = js.at("y").get<double>();
        site.antenna_height = detail::get_or(js, "antenna_height", 25.0);
        for (const auto& jc : js.at("cells")) {
            CellConfig cell;
            cell.cell_id = jc.at("cell_id").get<std::string>();
            cell.mechanical_azimuth = detail::get_or(jc, "mechanical_azimuth", 0.0);
            cell.tx_power = detail::get_or(jc, "tx_power", 43.0);
            cell.carrier_freq = detail::get_or(jc, "carrier_freq", 3.5);
            cell.bandwidth = detail::get_or(jc, "bandwidth", 100.0);
            cell.n_tx_antennas = detail::get_or(jc, "n_tx_antennas", 32);
            cell.max_gain = detail::get_or(jc, "max_gain", 17.0);
            if (auto it = jc.find("beams"); it != jc.end()) {
                for (const auto& jb : *it) cell.beams.push_back(beam_from_json(jb));
            } else {
                cell.beams = default_beams();
            }
            site.cells.push_back(std::move(cell));
        }
        sc.sites.push_back(std::move(site));
    }

    if (auto it = doc.find("population"); it != doc.end()) {
        const json& jp = *it;
        PopulationSpec& p = sc.population;
        p.n_users = detail::get_or(jp, "n_users", 0);
        p.ue_noise_figure = detail::get_or(jp, "ue_noise_figure", 9.0);
        p.ue_height = detail::get_or(jp, "ue_height", 1.5);
        p.ue_antennas = detail::get_or(jp, "ue_antennas", 2);
        if (auto sit = jp.find("speed_classes"); sit != jp.end()) {
            p.speed_classes.clear();
            for (const auto& jsc : *sit)
                p.speed_classes.push_back({jsc.at("speed").get<double>(),
                                           jsc.at("fraction").get<double>()});
        }
        if (auto tit = jp.find("traffic_profiles"); tit != jp.end()) {
            p.traffic_profiles.clear();
            for (const auto& jt : *tit) {
                TrafficProfile t;
                t.name = detail::get_or<std::string>(jt, "name", "default");
                t.session_rate = detail::get_or(jt, "session_rate", 2.0);
                t.mean_session_packets = detail::get_or(jt, "mean_session_packets", 50.0);
                t.packet_size_log_mu = detail::get_or(jt, "packet_size_log_mu", 6.9);
                t.packet_size_log_sigma = detail::get_or(jt, "packet_size_log_sigma", 1.0);
                t.dl_fraction = detail::get_or(jt, "dl_fraction", 0.8);
                t.fraction = detail::get_or(jt, "fraction", 1.0);
                p.traffic_profiles.push_back(std::move(t));
            }
        }
    }

    if (auto it = doc.find("radio"); it != doc.end()) {
        const json& jd = *it;
        RadioConstants& rc = sc.radio;
        rc.re_bandwidth = detail::get_or(jd, "re_bandwidth", rc.re_bandwidth);
        rc.rb_per_cell = detail::get_or(jd, "rb_per_cell", rc.rb_per_cell);
        rc.static_load = detail::get_or(jd, "static_load", rc.static_load);
        rc.q_rxlevmin = detail::get_or(jd, "q_rxlevmin", rc.q_rxlevmin);
        rc.max_users_per_cell = detail::get_or(jd, "max_users_per_cell", rc.max_users_per_cell);
        rc.ho_hysteresis = detail::get_or(jd, "ho_hysteresis", rc.ho_hysteresis);
        rc.ho_ttt = detail::get_or(jd, "ho_ttt", rc.ho_ttt);
        rc.tti_budget = detail::get_or(jd, "tti_budget", rc.tti_budget);
        rc.harq_max_tx = detail::get_or(jd, "harq_max_tx", rc.harq_max_tx);
        rc.p0 = detail::get_or(jd, "p0", rc.p0);
        rc.ul_alpha = detail::get_or(jd, "ul_alpha", rc.ul_alpha);
        rc.p_max = detail::get_or(jd, "p_max", rc.p_max);
        if (auto sit = jd.find("shadowing_sigma"); sit != jd.end()) {
            sc.shadowing_sigma[0] = detail::get_or(*sit, "Indoor", sc.shadowing_sigma[0]);
            sc.shadowing_sigma[1] = detail::get_or(*sit, "UMi", sc.shadowing_sigma[1]);
            sc.shadowing_sigma[2] = detail::get_or(*sit, "UMa", sc.shadowing_sigma[2]);
        }
    }

    sc.master_seed = detail::get_or<std::uint64_t>(doc, "seed", 1);

    validate(sc);
    return sc;
}

inline json scenario_to_json(const Scenario& sc) {
    json jr;
    jr["origin_lat"] = sc.region.origin_lat;
    jr["origin_lon"] = sc.region.origin_lon;
    jr["cell_size"] = sc.region.cell_size;
    jr["width"] = sc.region.width;
    jr["height"] = sc.region.height;
    json clut = json::array();
    json cls = json::array();
    for (int row = 0; row < sc.region.height; ++row) {
        json crow = json::array();
        json srow = json::array();
        for (int col = 0; col < sc.region.width; ++col) {
            crow.push_back(sc.region.clutter[row * sc.region.width + col]);
            srow.push_back(to_string(sc.region.scenario_class[row * sc.region.width + col]));
        }
        clut.push_back(std::move(crow));
        cls.push_back(std::move(srow));
    }
    jr["clutter"] = std::move(clut);
    jr["scenario_class"] = std::move(cls);

    json jsites = json::array();
    for (const auto& site : sc.sites) {
        json js{{"site_id", site.site_id}, {"x", site.x}, {"y", site.y},
                {"antenna_height", site.antenna_height}};
        json jcells = json::array();
        for (const auto& cell : site.cells) {
            json jc{{"cell_id", cell.cell_id},
                    {"mechanical_azimuth", cell.mechanical_azimuth},
                    {"tx_power", cell.tx_power},
                    {"carrier_freq", cell.carrier_freq},
                    {"bandwidth", cell.bandwidth},
                    {"n_tx_antennas", cell.n_tx_antennas},
                    {"max_gain", cell.max_gain}};
            json jbeams = json::array();
            for (const auto& b : cell.beams) jbeams.push_back(beam_to_json(b));
            jc["beams"] = std::move(jbeams);
            jcells.push_back(std::move(jc));
        }
        js["cells"] = std::move(jcells);
        jsites.push_back(std::move(js));
    }

    json jp;
    jp["n_users"] = sc.population.n_users;
    jp["ue_noise_figure"] = sc.population.ue_noise_figure;
    jp["ue_height"] = sc.population.ue_height;
    jp["ue_antennas"] = sc.population.ue_antennas;
    json jsc = json::array();
    for (const auto& c : sc.population.speed_classes)
        jsc.push_back({{"speed", c.speed}, {"fraction", c.fraction}});
    jp["speed_classes"] = std::move(jsc);
    json jtp = json::array();
    for (const auto& t : sc.population.traffic_profiles)
        jtp.push_back({{"name", t.name},
                       {"session_rate", t.session_rate},
                       {"mean_session_packets", t.mean_session_packets},
                       {"packet_size_log_mu", t.packet_size_log_mu},
                       {"packet_size_log_sigma", t.packet_size_log_sigma},
                       {"dl_fraction", t.dl_fraction},
                       {"fraction", t.fraction}});
    jp["traffic_profiles"] = std::move(jtp);

    const RadioConstants& rc = sc.radio;
    json jd{{"re_bandwidth", rc.re_bandwidth},
            {"rb_per_cell", rc.rb_per_cell},
            {"static_load", rc.static_load},
            {"q_rxlevmin", rc.q_rxlevmin},
            {"max_users_per_cell", rc.max_users_per_cell},
            {"ho_hysteresis", rc.ho_hysteresis},
            {"ho_ttt", rc.ho_ttt},
            {"tti_budget", rc.tti_budget},
            {"harq_max_tx", rc.harq_max_tx},
            {"p0", rc.p0},
            {"ul_alpha", rc.ul_alpha},
            {"p_max", rc.p_max},
            {"shadowing_sigma", {{"Indoor", sc.shadowing_sigma[0]},
                                 {"UMi", sc.shadowing_sigma[1]},
                                 {"UMa", sc.shadowing_sigma[2]}}}};

    return json{{"region", std::move(jr)},
                {"sites", std::move(jsites)},
                {"population", std::move(jp)},
                {"radio", std::move(jd)},
                {"seed", sc.master_seed}};
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("malformed scenario document " + path.string() + ": " + e.what());
    }
    try {
        return scenario_from_json(doc, path.parent_path());
    } catch (const json::exception& e) {
        throw ParseError("scenario document " + path.string() + ": " + e.what());
    }
}

inline void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write scenario file: " + path.string());
    out << scenario_to_json(sc).dump(2) << '\n';
}

}  // namespace cellsim
