// Acceptance suite: one pass/fail line per criterion, non-zero exit on any
// failure. Oracles are written from first principles, independent of the
// library code they check.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cellsim/csi.hpp"
#include "cellsim/optimize.hpp"
#include "cellsim/persist.hpp"
#include "cellsim/service.hpp"
#include "test_util.hpp"

#ifndef CELLSIM_CLI_PATH
#error "CELLSIM_CLI_PATH must point at the cellsim binary"
#endif

namespace fs = std::filesystem;
using namespace cellsim;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << idx << " (" << name
              << "): " << detail << "\n";
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path work_dir() {
    fs::path dir = fs::temp_directory_path() / "cellsim_acceptance";
    fs::create_directories(dir);
    return dir;
}

// Independent beam gain: parabolic pattern in both planes, 30 dB floor.
double oracle_gain(const BeamConfig& b, const CellConfig& cell, double azimuth,
                   double elevation) {
    double dphi = azimuth - cell.mechanical_azimuth - b.azimuth_offset;
    dphi = std::fmod(dphi, 360.0);
    if (dphi <= -180.0) dphi += 360.0;
    if (dphi > 180.0) dphi -= 360.0;
    double dth = elevation - b.electrical_tilt;
    double ah = std::min(12.0 * dphi * dphi / (b.h_beamwidth * b.h_beamwidth), 30.0);
    double av = std::min(12.0 * dth * dth / (b.v_beamwidth * b.v_beamwidth), 30.0);
    return cell.max_gain - std::min(ah + av, 30.0);
}

// Independent per-beam RSRP on a flat UMa region with zero clutter.
double oracle_rsrp(const Scenario& sc, const CellRef& ref, const BeamConfig& b,
                   double x, double y, bool shadowing) {
    double dx = x - ref.site->x, dy = y - ref.site->y;
    double d2d = std::sqrt(dx * dx + dy * dy);
    double dh = ref.site->antenna_height - sc.population.ue_height;
    double d3d = std::max(std::sqrt(d2d * d2d + dh * dh), 1.0);
    double az = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
    if (az < 0) az += 360.0;
    double el = std::atan2(dh, std::max(d2d, 1e-9)) * 180.0 / std::numbers::pi;
    double pl = 28.0 + 22.0 * std::log10(d3d) +
                20.0 * std::log10(ref.cell->carrier_freq);
    double shadow = 0.0;
    if (shadowing) {
        int gi = sc.region.grid_index(x, y);
        shadow = rng_stream(sc.master_seed, "shadow", gi, ref.index).normal(0.0, 6.0);
    }
    return ref.cell->tx_power - 10.0 * std::log10(sc.radio.rb_per_cell * 12.0) +
           oracle_gain(b, *ref.cell, az, el) - pl - shadow;
}

// 1. Coverage oracle equivalence on a 3-cell, 100-point toy.
void criterion_coverage_oracle() {
    auto t0 = Clock::now();
    Scenario sc = test::three_cell_scenario();
    PathLossModel m = path_loss_model_for(sc);
    Action action = current_action(sc);
    std::vector<double> loads{0.3, 0.6, 0.9};
    RngStream s(404, "accept1", 0, 0);
    std::vector<EvalPoint> pts;
    for (int i = 0; i < 100; ++i)
        pts.push_back({s.uniform(0.0, 3000.0), s.uniform(0.0, 2000.0), 1.5, i});
    CoverageFrame f = coverage_frame(sc, m, pts, action, 0, loads, true);

    auto cells = all_cells(sc);
    double max_err = 0.0;
    for (std::size_t pi = 0; pi < pts.size(); ++pi) {
        double best = -1e300;
        int best_c = -1;
        std::vector<double> cell_best(cells.size(), -1e300);
        for (const auto& ref : cells) {
            for (int bi = 0; bi < kBeamsPerCell; ++bi) {
                double v = oracle_rsrp(sc, ref, action.at(ref.cell->cell_id)[bi],
                                       pts[pi].x, pts[pi].y, true);
                max_err = std::max(max_err,
                                   std::abs(v - f.rsrp_at(static_cast<int>(pi),
                                                          ref.index, bi)));
                cell_best[ref.index] = std::max(cell_best[ref.index], v);
                if (v > best) {
                    best = v;
                    best_c = ref.index;
                }
            }
        }
        double denom = std::pow(10.0, noise_per_re_dbm(sc) / 10.0);
        for (std::size_t ci = 0; ci < cells.size(); ++ci)
            if (static_cast<int>(ci) != best_c)
                denom += loads[ci] * std::pow(10.0, cell_best[ci] / 10.0);
        double want = 10.0 * std::log10(std::pow(10.0, best / 10.0) / denom);
        max_err = std::max(max_err, std::abs(want - f.sinr_db[pi]));
    }
    double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "max |err| " << max_err << " dB over 100 points, " << elapsed << " s";
    report(1, "coverage oracle equivalence", max_err < 1e-9 && elapsed < 1.0, os.str());
}

// 2. Pattern arithmetic over a randomized 1e4-case sweep.
void criterion_pattern() {
    CellConfig cell = test::make_cell("c", 0.0);
    RngStream s(404, "accept2", 0, 0);
    bool ok = true;
    double max_err = 0.0;
    for (int i = 0; i < 10000; ++i) {
        BeamConfig b{s.uniform(-60.0, 60.0), s.uniform(0.0, 15.0),
                     s.uniform(15.0, 110.0), s.uniform(3.0, 30.0)};
        double az = s.uniform(0.0, 360.0);
        double el = s.uniform(-90.0, 90.0);
        double g = beam_gain(b, cell, az, el);
        max_err = std::max(max_err, std::abs(g - oracle_gain(b, cell, az, el)));

        // -3 dB at half beamwidth, each plane, boresight in the other
        double bs_az = cell.mechanical_azimuth + b.azimuth_offset;
        double h3 = beam_gain(b, cell, bs_az + b.h_beamwidth / 2.0, b.electrical_tilt);
        double v3 = beam_gain(b, cell, bs_az, b.electrical_tilt + b.v_beamwidth / 2.0);
        if (std::abs(h3 - (cell.max_gain - 3.0)) > 1e-9) ok = false;
        if (std::abs(v3 - (cell.max_gain - 3.0)) > 1e-9) ok = false;

        // 30 dB floor at the back lobe
        double back = beam_gain(b, cell, bs_az + 180.0, b.electrical_tilt);
        if (b.h_beamwidth <= 110.0 &&
            std::abs(back - (cell.max_gain - 30.0)) > 1e-9)
            ok = false;
        if (g > cell.max_gain + 1e-12 || g < cell.max_gain - 30.0 - 1e-12) ok = false;
    }
    ok = ok && max_err < 1e-9;
    std::ostringstream os;
    os << "1e4 cases, max formula err " << max_err << " dB";
    report(2, "pattern arithmetic", ok, os.str());
}

// 3. Channel normalization ensemble + DFT oracle.
void criterion_channel() {
    auto t0 = Clock::now();
    RngStream s(404, "accept3", 0, 0);
    double acc = 0.0;
    long count = 0;
    // Tap delays land on the 64-point DFT grid, so each draw's per-RE mean
    // equals the summed tap power by Parseval; the ensemble mean then
    // estimates the unit normalization with std ~1.3e-3 over 1e4 draws.
    for (int d = 0; d < 10000; ++d) {
        TapSet ts = draw_multipath({64, 1.0 / 30e3, 0.0, 0.0}, 1, 1, s);
        ChannelGrid g = freq_response(ts, {64, 1, 30e3, 1.0 / 30e3});
        for (const auto& v : g.values) {
            acc += std::norm(v);
            ++count;
        }
    }
    double mean_power = acc / count;

    // DFT oracle: taps on the sampling grid n / (K * spacing)
    const int K = 64;
    const double spacing = 30e3;
    TapSet ts;
    ts.n_tx = ts.n_rx = 1;
    std::vector<int> bins{0, 5, 11, 23, 40};
    for (int bin : bins) {
        Tap tap;
        tap.delay = bin / (K * spacing);
        tap.power = 0.2;
        tap.gains = {cd(s.normal(), s.normal())};
        ts.taps.push_back(tap);
    }
    ChannelGrid g = freq_response(ts, {K, 1, spacing, 1.0 / spacing});
    std::vector<cd> h(K, cd{});
    for (std::size_t i = 0; i < bins.size(); ++i) h[bins[i]] += ts.taps[i].gains[0];
    double max_err = 0.0;
    for (int k = 0; k < K; ++k) {
        cd H{};
        for (int n = 0; n < K; ++n)
            H += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * k * n / K);
        max_err = std::max(max_err, std::abs(H - g.at(k, 0, 0, 0)));
    }
    double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "mean per-RE power " << mean_power << ", DFT max err " << max_err << ", "
       << elapsed << " s";
    report(3, "channel normalization and DFT oracle",
           mean_power > 0.99 && mean_power < 1.01 && max_err < 1e-9 && elapsed < 30.0,
           os.str());
}

// 4. CSI NMSE monotone in the bit budget; lossless configuration < 1e-6.
void criterion_csi() {
    RngStream s(404, "accept4", 0, 0);
    const std::vector<int> budgets{16, 32, 64, 128, 256};
    bool monotone = true;
    double worst_final = 0.0;
    for (int ch = 0; ch < 100; ++ch) {
        ChannelGrid g;
        g.n_subcarriers = 4;
        g.n_symbols = 1;
        g.n_tx = g.n_rx = 1;
        g.values.resize(4);
        for (auto& v : g.values) v = cd(s.normal(), s.normal());
        CsiGridSpec spec{4, 1, 1, 1, 30e3};
        double prev = std::numeric_limits<double>::infinity();
        double nmse = 0.0;
        for (int budget : budgets) {
            CsiReport rep = csi_compress(g, budget);
            ChannelGrid hat = csi_decompress(rep, spec);
            nmse = csi_fidelity(g, hat).nmse;
            if (nmse > prev + 1e-12) monotone = false;
            prev = nmse;
        }
        worst_final = std::max(worst_final, nmse);
    }
    std::ostringstream os;
    os << "100 channels x budgets {16..256}, worst top-budget NMSE " << worst_final;
    report(4, "CSI budget monotonicity", monotone && worst_final < 1e-6, os.str());
}

// 5. RB conservation on 1e5 randomized TTIs; PF fairness utility >= RR on a
// fixed heterogeneous toy: 4 full-buffer users, base SINRs {18,12,6,0} dB with
// a per-user 8 dB sinusoidal ripple (period 50 TTIs), 50 RBs, 2000 TTIs.
void criterion_scheduler() {
    RngStream s(404, "accept5", 0, 0);
    bool conserved = true;
    for (int rep = 0; rep < 100000; ++rep) {
        int rb_total = 1 + static_cast<int>(s.uniform_int(273));
        int n = 1 + static_cast<int>(s.uniform_int(8));
        std::vector<UserLink> users;
        for (int i = 0; i < n; ++i)
            users.push_back({i, s.uniform(-10.0, 30.0), s.uniform_int(100000),
                             s.uniform(1.0, 1e7), 1});
        auto policy = rep % 2 == 0 ? SchedulerPolicy::RoundRobin
                                   : SchedulerPolicy::ProportionalFair;
        TtiAllocation a = schedule_tti(rb_total, 1, users, policy);
        int used = 0;
        for (const auto& g : a.grants) used += g.rb_count;
        if (used != a.rb_used || a.rb_used > rb_total) conserved = false;
    }

    auto run_policy = [&](SchedulerPolicy policy) {
        std::vector<double> base{18.0, 12.0, 6.0, 0.0};
        std::vector<double> avg(4, kPfThroughputFloor);
        std::vector<double> served_bits(4, 0.0);
        const int ttis = 2000, rb = 50;
        for (int t = 0; t < ttis; ++t) {
            std::vector<UserLink> users;
            for (int i = 0; i < 4; ++i) {
                double sinr = base[i] +
                              8.0 * std::sin(2.0 * std::numbers::pi *
                                             (t / 50.0 + i / 4.0));
                users.push_back({i, sinr, 1ULL << 40, avg[i], 1});
            }
            TtiAllocation a = schedule_tti(rb, 1, users, policy);
            std::vector<double> inst(4, 0.0);
            for (const auto& g : a.grants) {
                served_bits[g.user_id] += static_cast<double>(g.transport_bytes) * 8.0;
                inst[g.user_id] = static_cast<double>(g.transport_bytes) * 8.0 / 1e-3;
            }
            for (int i = 0; i < 4; ++i)
                avg[i] = std::max((1.0 - kPfSmoothing) * avg[i] +
                                      kPfSmoothing * inst[i],
                                  kPfThroughputFloor);
        }
        double sum_log = 0.0;
        for (double b : served_bits) sum_log += std::log(std::max(b, 1.0));
        return sum_log;
    };
    double pf = run_policy(SchedulerPolicy::ProportionalFair);
    double rr = run_policy(SchedulerPolicy::RoundRobin);

    std::ostringstream os;
    os << "conservation over 1e5 TTIs " << (conserved ? "held" : "violated")
       << "; sum log throughput PF " << pf << " vs RR " << rr;
    report(5, "scheduler properties", conserved && pf >= rr, os.str());
}

// 6. Handover sanity: symmetric midpoint stays put; a drive-by hands over
// exactly once at the step index derived from the independent RSRP oracle.
void criterion_handover() {
    Scenario sc = test::two_cell_symmetric_scenario();
    PathLossModel m = path_loss_model_for(sc);
    Action action = current_action(sc);
    auto cells = all_cells(sc);
    std::vector<double> loads{0.5, 0.5};

    auto measurements_at = [&](double x, double y) {
        std::vector<EvalPoint> pt{{x, y, sc.population.ue_height, 0}};
        CoverageFrame f = coverage_frame(sc, m, pt, action, 0, loads, false);
        std::vector<CellMeasurement> ms(cells.size());
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            ms[ci].cell_index = static_cast<int>(ci);
            for (int bi = 0; bi < kBeamsPerCell; ++bi)
                ms[ci].beam_rsrp[bi] = f.rsrp_at(0, static_cast<int>(ci), bi);
        }
        return ms;
    };

    // midpoint: perfectly symmetric, strict hysteresis never satisfied
    Attachment att;
    att.user_id = 0;
    att.serving_cell = 0;
    att.serving_beam = 0;
    att.state = AttachState::Connected;
    {
        auto ms = measurements_at(1000.0, 1000.0);
        att.serving_beam = best_beam(ms[0].beam_rsrp);
    }
    int midpoint_handovers = 0;
    for (int step = 0; step < 1000; ++step) {
        auto ms = measurements_at(1000.0, 1000.0);
        int before = att.serving_cell;
        att = evaluate_handover(att, ms, sc.radio.ho_hysteresis, sc.radio.ho_ttt, 1.0);
        if (att.serving_cell != before) ++midpoint_handovers;
    }

    // drive-by west to east, 1 m per 1 s step; with ttt 0.32 < dt the switch
    // lands on the first step where the A3 condition holds
    const double y = 1000.0;
    const int n_steps = 801;
    auto pos = [](int i) { return 600.0 + 1.0 * i; };
    int expected_step = -1;
    for (int i = 0; i < n_steps; ++i) {
        double best_a = -1e300, best_b = -1e300;
        for (int bi = 0; bi < kBeamsPerCell; ++bi) {
            best_a = std::max(best_a,
                              oracle_rsrp(sc, cells[0],
                                          action.at(cells[0].cell->cell_id)[bi],
                                          pos(i), y, false));
            best_b = std::max(best_b,
                              oracle_rsrp(sc, cells[1],
                                          action.at(cells[1].cell->cell_id)[bi],
                                          pos(i), y, false));
        }
        if (best_b > best_a + sc.radio.ho_hysteresis) {
            expected_step = i;
            break;
        }
    }

    Attachment drive;
    drive.user_id = 1;
    drive.serving_cell = 0;
    drive.state = AttachState::Connected;
    drive.serving_beam = best_beam(measurements_at(pos(0), y)[0].beam_rsrp);
    int handovers = 0, handover_step = -1;
    for (int i = 0; i < n_steps; ++i) {
        auto ms = measurements_at(pos(i), y);
        int before = drive.serving_cell;
        drive = evaluate_handover(drive, ms, sc.radio.ho_hysteresis, sc.radio.ho_ttt, 1.0);
        if (drive.serving_cell != before) {
            ++handovers;
            handover_step = i;
        }
    }

    std::ostringstream os;
    os << "midpoint handovers " << midpoint_handovers << "; drive-by handovers "
       << handovers << " at step " << handover_step << " (expected "
       << expected_step << ")";
    report(6, "handover sanity",
           midpoint_handovers == 0 && handovers == 1 && expected_step >= 0 &&
               handover_step == expected_step,
           os.str());
}

// 7. Annealing vs exhaustive oracle on the 343-configuration tilt grid.
void criterion_optimizer() {
    auto t0 = Clock::now();
    EpisodeSpec spec = EpisodeSpec::make(test::three_cell_scenario(30), 1,
                                         EmulatorMode::CoverageOnly);
    SearchSpec search{{{BeamParam::Tilt, 0.0, 12.0, 2.0}}, false};  // 7^3 configs
    OptimizeResult oracle = exhaustive_search(spec, search);
    int successes = 0;
    double worst = 1.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        OptimizeResult res = local_search_optimize(spec, search, 150, seed);
        double frac = res.best_reward / oracle.best_reward;
        worst = std::min(worst, frac);
        if (frac >= 0.98) ++successes;
    }
    double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << oracle.trace.size() << " oracle evals, best " << oracle.best_reward << "; "
       << successes << "/20 seeds >= 98% (worst " << worst << "), " << elapsed << " s";
    report(7, "optimization vs brute force",
           oracle.trace.size() == 343 && successes >= 18 && elapsed < 300.0, os.str());
}

// 8. Reference-scale determinism and runtime through the CLI.
void criterion_scale() {
    fs::path dir = work_dir();
    fs::path scenario = dir / "reference.json";
    save_scenario(test::reference_scenario(), scenario);
    std::string cli = CELLSIM_CLI_PATH;
    std::string base = cli + " run --scenario " + scenario.string() +
                       " --steps 288 --mode stack";
    auto t0 = Clock::now();
    int rc1 = std::system((base + " --out " + (dir / "ref1").string() +
                           " > /dev/null").c_str());
    double elapsed = seconds_since(t0);
    int rc2 = std::system((base + " --out " + (dir / "ref2").string() +
                           " > /dev/null").c_str());
    bool ok = rc1 == 0 && rc2 == 0;
    bool identical = false;
    if (ok)
        identical = read_file_bytes(dir / "ref1" / "kpis.jsonl") ==
                    read_file_bytes(dir / "ref2" / "kpis.jsonl");
    std::ostringstream os;
    os << "21 cells / 500 users / 288 steps in " << elapsed << " s; reruns "
       << (identical ? "byte-identical" : "differ");
    report(8, "end-to-end determinism and scale", ok && identical && elapsed < 60.0,
           os.str());
}

// 9. Wire frames match the CLI file output byte for byte.
void criterion_transport() {
    fs::path dir = work_dir();
    fs::path scenario = dir / "wire.json";
    Scenario sc = test::three_cell_scenario(25);
    save_scenario(sc, scenario);

    Action act = current_action(sc);
    for (auto& [cell, beams] : act)
        for (auto& b : beams) b.electrical_tilt = 4.0;
    fs::path action_file = dir / "wire_action.json";
    std::ofstream(action_file) << action_to_json(act).dump(2) << '\n';

    std::string cli = CELLSIM_CLI_PATH;
    int rc = std::system((cli + " run --scenario " + scenario.string() +
                          " --steps 10 --mode stack --action " +
                          action_file.string() + " --out " +
                          (dir / "wire_out").string() + " > /dev/null")
                             .c_str());

    std::vector<std::string> wire_lines;
    bool service_ok = true;
    try {
        Service service("127.0.0.1", 0, 4);
        service.start();
        LineClient client("127.0.0.1", service.port());
        std::string sid = client.request({{"op", "hello"}})["session_id"];
        json spec{{"scenario", scenario_to_json(sc)},
                  {"horizon_steps", 10},
                  {"step_seconds", 300.0},
                  {"mode", "stack"}};
        json r = client.request({{"op", "reset"}, {"session_id", sid}, {"spec", spec}});
        if (r["op"] != "reset") service_ok = false;
        for (int i = 0; i < 10 && service_ok; ++i) {
            json sr = client.request({{"op", "step"},
                                      {"session_id", sid},
                                      {"action", action_to_json(act)}});
            if (sr["op"] != "step") {
                service_ok = false;
                break;
            }
            wire_lines.push_back(sr["observation"].dump());
        }
        service.stop();
    } catch (const std::exception&) {
        service_ok = false;
    }

    std::vector<std::string> file_lines;
    if (rc == 0) {
        std::ifstream in(dir / "wire_out" / "kpis.jsonl");
        std::string line;
        while (std::getline(in, line)) file_lines.push_back(line);
    }
    bool identical = rc == 0 && service_ok && wire_lines.size() == 10 &&
                     file_lines == wire_lines;
    std::ostringstream os;
    os << "10-step replay, " << wire_lines.size() << " wire frames vs "
       << file_lines.size() << " file frames, "
       << (identical ? "byte-identical" : "mismatch");
    report(9, "transport transparency", identical, os.str());
}

}  // namespace

int main() {
    criterion_coverage_oracle();
    criterion_pattern();
    criterion_channel();
    criterion_csi();
    criterion_scheduler();
    criterion_handover();
    criterion_optimizer();
    criterion_scale();
    criterion_transport();
    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                  : "FAILURES: " + std::to_string(g_failures))
              << "\n";
    return g_failures == 0 ? 0 : 1;
}
