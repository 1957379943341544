#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cellsim/persist.hpp"
#include "test_util.hpp"

using namespace cellsim;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    fs::path dir = fs::temp_directory_path() / "cellsim_persist_tests";
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_SUITE("persist") {
    TEST_CASE("scenario hash is stable and content-sensitive") {
        fs::path dir = work_dir();
        Scenario sc = test::single_cell_scenario(3);
        save_scenario(sc, dir / "h1.json");
        std::string h1 = scenario_file_hash(dir / "h1.json");
        CHECK(h1.size() == 16);
        CHECK(h1 == scenario_file_hash(dir / "h1.json"));
        CHECK(h1 == hex64(detail::fnv1a(read_file_bytes(dir / "h1.json"))));
        sc.master_seed = 43;
        save_scenario(sc, dir / "h2.json");
        CHECK(h1 != scenario_file_hash(dir / "h2.json"));
    }

    TEST_CASE("manifest verifies and detects tampering") {
        fs::path dir = work_dir();
        Scenario sc = test::single_cell_scenario(2);
        save_scenario(sc, dir / "scenario.json");
        RunManifest m;
        m.run_id = "r1";
        m.scenario_path = "scenario.json";
        m.scenario_hash = scenario_file_hash(dir / "scenario.json");
        m.started_at = iso_timestamp();
        m.finished_at = iso_timestamp();
        m.output_files = {"kpis.jsonl"};
        write_manifest(m, dir / "manifest.json");
        CHECK(verify_manifest(dir / "manifest.json"));

        // any scenario edit must break verification
        std::ofstream(dir / "scenario.json", std::ios::app) << " ";
        CHECK(!verify_manifest(dir / "manifest.json"));
    }

    TEST_CASE("manifest json carries every field") {
        RunManifest m;
        m.run_id = "abc";
        m.scenario_path = "x.json";
        m.scenario_hash = "00ff";
        m.spec_summary = {{"horizon_steps", 4}};
        m.started_at = "2026-01-01T00:00:00Z";
        m.finished_at = "2026-01-01T00:00:05Z";
        m.output_files = {"a", "b"};
        json j = manifest_to_json(m);
        CHECK(j["run_id"] == "abc");
        CHECK(j["scenario_hash"] == "00ff");
        CHECK(j["spec"]["horizon_steps"] == 4);
        CHECK(j["output_files"].size() == 2);
        CHECK(j["engine_version"] == kEngineVersion);
    }

    TEST_CASE("frame files are canonical JSON lines") {
        fs::path dir = work_dir();
        EpisodeSpec spec = EpisodeSpec::make(test::single_cell_scenario(4), 2,
                                             EmulatorMode::ProtocolStack);
        auto frames = run_episode(spec, current_action(spec.scenario));
        write_frames(frames, dir / "kpis.jsonl");
        auto lines = read_lines(dir / "kpis.jsonl");
        REQUIRE(lines.size() == frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i)
            CHECK(lines[i] == frame_line(frames[i]));
    }

    TEST_CASE("trace csv layout") {
        fs::path dir = work_dir();
        Scenario sc = test::single_cell_scenario();
        std::vector<Evaluation> trace{{current_action(sc), 0.25},
                                      {current_action(sc), 0.5}};
        write_trace_csv(trace, dir / "trace.csv");
        auto lines = read_lines(dir / "trace.csv");
        REQUIRE(lines.size() == 3);
        CHECK(lines[0] == "index,action_hash,reward");
        std::string expected_hash = hex64(action_hash(current_action(sc)));
        CHECK(lines[1] == "0," + expected_hash + ",0.25");
        CHECK(lines[2] == "1," + expected_hash + ",0.5");
    }

    TEST_CASE("heatmap covers the raster and matches the coverage frame") {
        fs::path dir = work_dir();
        Scenario sc = test::single_cell_scenario();
        Action a = current_action(sc);
        write_heatmap_csv(sc, a, HeatmapMetric::Rsrp, dir / "rsrp.csv");
        auto lines = read_lines(dir / "rsrp.csv");
        REQUIRE(static_cast<int>(lines.size()) == sc.region.height);

        // parse one row and spot-check a value against a direct evaluation
        std::vector<double> row0;
        std::stringstream ss(lines[0]);
        std::string tok;
        while (std::getline(ss, tok, ',')) row0.push_back(std::stod(tok));
        REQUIRE(static_cast<int>(row0.size()) == sc.region.width);

        PathLossModel model = path_loss_model_for(sc);
        std::vector<EvalPoint> pt{{0.5 * sc.region.cell_size, 0.5 * sc.region.cell_size,
                                   sc.population.ue_height, 0}};
        std::vector<double> loads(sc.total_cells(), sc.radio.static_load);
        CoverageFrame f = coverage_frame(sc, model, pt, a, 0, loads);
        double expect = f.rsrp_at(0, f.serving_cell[0], f.serving_beam[0]);
        CHECK(row0[0] == doctest::Approx(expect).epsilon(1e-9));

        // sinr variant shares the shape
        write_heatmap_csv(sc, a, HeatmapMetric::Sinr, dir / "sinr.csv");
        CHECK(read_lines(dir / "sinr.csv").size() == lines.size());

        // specific (cell, beam) map
        write_heatmap_csv(sc, a, HeatmapMetric::Rsrp, dir / "beam.csv", 0, 3);
        auto beam_lines = read_lines(dir / "beam.csv");
        std::vector<double> brow;
        std::stringstream bs(beam_lines[0]);
        while (std::getline(bs, tok, ',')) brow.push_back(std::stod(tok));
        CHECK(brow[0] == doctest::Approx(f.rsrp_at(0, 0, 3)).epsilon(1e-9));
    }
}
