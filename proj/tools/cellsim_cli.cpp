// cellsim command line: batch emulator runs, beam-parameter optimization,
// channel export and the TCP session service.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "cellsim/engine.hpp"
#include "cellsim/optimize.hpp"
#include "cellsim/persist.hpp"
#include "cellsim/service.hpp"

namespace fs = std::filesystem;
using namespace cellsim;

namespace {

RewardWeights parse_weights(const std::string& csv, RewardWeights w) {
    std::stringstream ss(csv);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.size() != 5)
        throw ParseError("--weights expects five comma-separated floats "
                         "(rsrp,sinr,users,traffic,rate)");
    w.w_rsrp = vals[0];
    w.w_sinr = vals[1];
    w.w_users = vals[2];
    w.w_traffic = vals[3];
    w.w_rate = vals[4];
    return w;
}

SearchSpec parse_grid(const std::string& grid_arg, bool per_beam) {
    SearchSpec search;
    search.per_beam = per_beam;
    std::stringstream ss(grid_arg);
    std::string entry;
    while (std::getline(ss, entry, ',')) {
        std::stringstream es(entry);
        std::string name, lo, hi, step;
        if (!std::getline(es, name, ':') || !std::getline(es, lo, ':') ||
            !std::getline(es, hi, ':') || !std::getline(es, step, ':'))
            throw ParseError("--grid entry must be param:min:max:step");
        ParamGrid g;
        if (name == "azimuth") g.param = BeamParam::AzimuthOffset;
        else if (name == "tilt") g.param = BeamParam::Tilt;
        else if (name == "hbw") g.param = BeamParam::HBeamwidth;
        else if (name == "vbw") g.param = BeamParam::VBeamwidth;
        else throw ParseError("--grid: unknown parameter '" + name + "'");
        g.min = std::stod(lo);
        g.max = std::stod(hi);
        g.step = std::stod(step);
        if (!(g.step > 0.0) || g.max < g.min)
            throw ParseError("--grid: need max >= min and step > 0");
        search.params.push_back(g);
    }
    if (search.params.empty()) throw ParseError("--grid: empty grid");
    return search;
}

struct CommonRunArgs {
    std::string scenario_path;
    std::string mode = "stack";
    int steps = 1;
    std::string out_dir = "out";
    std::string weights_csv;
    std::string action_path;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    bool no_shadowing = false;
    bool per_user = false;
    std::string scheduler = "pf";
};

EpisodeSpec build_spec(const CommonRunArgs& args) {
    Scenario sc = load_scenario(args.scenario_path);
    if (args.has_seed_override) sc.master_seed = args.seed_override;
    EpisodeSpec spec;
    spec.horizon_steps = args.steps;
    spec.mode = args.mode == "coverage" ? EmulatorMode::CoverageOnly
                                        : EmulatorMode::ProtocolStack;
    spec.shadowing = !args.no_shadowing;
    spec.scheduler = args.scheduler == "rr" ? SchedulerPolicy::RoundRobin
                                            : SchedulerPolicy::ProportionalFair;
    spec.weights = default_weights(sc, spec.step_seconds);
    if (!args.weights_csv.empty())
        spec.weights = parse_weights(args.weights_csv, spec.weights);
    spec.scenario = std::move(sc);
    return spec;
}

int cmd_run(const CommonRunArgs& args, const std::string& heatmap_metric) {
    EpisodeSpec spec = build_spec(args);
    std::optional<Action> action;
    if (!args.action_path.empty())
        action = action_from_json(json::parse(read_file_bytes(args.action_path)));

    RunManifest manifest;
    manifest.run_id = hex64(detail::fnv1a(args.scenario_path)) + "-" +
                      std::to_string(spec.scenario.master_seed);
    manifest.scenario_path = args.scenario_path;
    manifest.scenario_hash = scenario_file_hash(args.scenario_path);
    manifest.spec_summary = json{{"mode", args.mode},
                                 {"steps", args.steps},
                                 {"scheduler", args.scheduler},
                                 {"seed", spec.scenario.master_seed}};
    manifest.started_at = iso_timestamp();

    Action act = action ? *action : current_action(spec.scenario);
    std::vector<KpiFrame> frames = run_episode(spec, act);

    fs::create_directories(args.out_dir);
    fs::path kpis = fs::path(args.out_dir) / "kpis.jsonl";
    write_frames(frames, kpis, args.per_user);
    manifest.output_files.push_back(kpis.string());
    if (!heatmap_metric.empty()) {
        fs::path hm = fs::path(args.out_dir) / "heatmap.csv";
        write_heatmap_csv(spec.scenario, act,
                          heatmap_metric == "sinr" ? HeatmapMetric::Sinr
                                                   : HeatmapMetric::Rsrp,
                          hm);
        manifest.output_files.push_back(hm.string());
    }
    manifest.finished_at = iso_timestamp();
    write_manifest(manifest, fs::path(args.out_dir) / "manifest.json");
    std::cout << "wrote " << frames.size() << " frames to " << kpis.string() << "\n";
    return 0;
}

int cmd_optimize(const CommonRunArgs& args, const std::string& grid_arg,
                 bool per_beam, int budget, bool exhaustive, std::uint64_t opt_seed) {
    EpisodeSpec spec = build_spec(args);
    SearchSpec search = parse_grid(grid_arg, per_beam);

    OptimizeResult result = exhaustive
                                ? exhaustive_search(spec, search)
                                : local_search_optimize(spec, search, budget, opt_seed);

    fs::create_directories(args.out_dir);
    fs::path best = fs::path(args.out_dir) /
                    (exhaustive ? "best_action_exhaustive.json" : "best_action.json");
    std::ofstream bf(best);
    bf << action_to_json(result.best_action).dump(2) << '\n';
    fs::path trace = fs::path(args.out_dir) /
                     (exhaustive ? "trace_exhaustive.csv" : "trace.csv");
    write_trace_csv(result.trace, trace);
    std::cout << "best reward " << std::setprecision(12) << result.best_reward
              << " over " << result.trace.size() << " evaluations\n"
              << "wrote " << best.string() << " and " << trace.string() << "\n";
    return 0;
}

int cmd_export_channel(const std::string& scenario_path, const std::string& cell_id,
                       double x, double y, const GridSpec& grid,
                       const MultipathProfile& profile, const std::string& out_file) {
    Scenario sc = load_scenario(scenario_path);
    LinkSpec link;
    link.cell_id = cell_id;
    link.x = x;
    link.y = y;
    link.grid = grid;
    link.profile = profile;
    ChannelGrid channel = run_link_channel_sim(sc, link);
    write_channel_file(channel, out_file);
    std::cout << "wrote " << channel.size() << " channel values to " << out_file << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"system-level wireless network emulator"};
    app.require_subcommand(1);

    CommonRunArgs args;
    std::string heatmap_metric;

    auto add_common = [&](CLI::App* cmd, bool with_steps = true) {
        cmd->add_option("--scenario", args.scenario_path, "scenario JSON file")->required();
        if (with_steps) cmd->add_option("--steps", args.steps, "episode steps");
        cmd->add_option("--mode", args.mode, "stack|coverage")
            ->check(CLI::IsMember({"stack", "coverage"}));
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--weights", args.weights_csv,
                        "five comma floats: rsrp,sinr,users,traffic,rate");
        cmd->add_option("--scheduler", args.scheduler, "pf|rr")
            ->check(CLI::IsMember({"pf", "rr"}));
        cmd->add_flag("--no-shadowing", args.no_shadowing, "disable shadow fading");
        auto* seed = cmd->add_option("--seed-override", args.seed_override,
                                     "override the scenario master seed");
        seed->each([&](const std::string&) { args.has_seed_override = true; });
    };

    auto* run = app.add_subcommand("run", "run a combination emulator episode");
    add_common(run);
    run->add_option("--action", args.action_path, "fixed action JSON file");
    run->add_flag("--per-user", args.per_user, "include per-user records in kpis.jsonl");
    run->add_option("--heatmap", heatmap_metric, "also export rsrp|sinr heatmap CSV")
        ->check(CLI::IsMember({"rsrp", "sinr"}));

    std::string grid_arg = "tilt:0:12:2";
    bool per_beam = false, exhaustive = false;
    int budget = 150;
    std::uint64_t opt_seed = 0;
    auto* opt = app.add_subcommand("optimize", "search beam parameters");
    add_common(opt);
    opt->add_option("--grid", grid_arg, "search grid, param:min:max:step[,...]");
    opt->add_flag("--per-beam", per_beam, "tune each beam independently");
    opt->add_option("--budget", budget, "annealing evaluation budget");
    opt->add_flag("--grid-exhaustive", exhaustive, "exhaustive grid evaluation (oracle)");
    opt->add_option("--opt-seed", opt_seed, "annealing seed");

    std::string cell_id, channel_out = "channel.jtch", scenario_path2;
    double px = 0, py = 0;
    GridSpec gspec;
    MultipathProfile profile;
    auto* exp = app.add_subcommand("export-channel", "export an RE-level channel grid");
    exp->add_option("--scenario", scenario_path2, "scenario JSON file")->required();
    exp->add_option("--cell", cell_id, "cell id")->required();
    exp->add_option("--x", px, "UE x, meters")->required();
    exp->add_option("--y", py, "UE y, meters")->required();
    exp->add_option("--subcarriers", gspec.n_subcarriers, "grid subcarriers");
    exp->add_option("--symbols", gspec.n_symbols, "grid symbols");
    exp->add_option("--spacing", gspec.spacing, "subcarrier spacing Hz");
    exp->add_option("--symbol-duration", gspec.symbol_duration, "symbol duration s");
    exp->add_option("--taps", profile.n_taps, "multipath taps");
    exp->add_option("--delay-spread", profile.delay_spread, "delay spread s");
    exp->add_option("--rician-k", profile.rician_k, "Rician K, linear");
    exp->add_option("--doppler", profile.doppler_hz, "max Doppler Hz");
    exp->add_option("--out", channel_out, "output .jtch file");

    std::string bind = "127.0.0.1:7788", scenario_dir = ".";
    int max_sessions = 16;
    auto* serve = app.add_subcommand("serve", "run the TCP session service");
    serve->add_option("--bind", bind, "address:port");
    serve->add_option("--max-sessions", max_sessions, "concurrent session limit");
    serve->add_option("--scenario-dir", scenario_dir, "base dir for scenario_path specs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return cmd_run(args, heatmap_metric);
        if (opt->parsed())
            return cmd_optimize(args, grid_arg, per_beam, budget, exhaustive, opt_seed);
        if (exp->parsed())
            return cmd_export_channel(scenario_path2, cell_id, px, py, gspec, profile,
                                      channel_out);
        if (serve->parsed()) {
            auto colon = bind.rfind(':');
            if (colon == std::string::npos)
                throw ParseError("--bind must be address:port");
            Service service(bind.substr(0, colon), std::stoi(bind.substr(colon + 1)),
                            max_sessions, scenario_dir);
            std::cout << "listening on " << bind << "\n";
            service.run_blocking();
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
