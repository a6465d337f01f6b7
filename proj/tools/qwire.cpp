#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "qwire/sim.hpp"

namespace {

using qw::sim::Json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

Json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw qw::sim::ConfigError(path, "cannot open file");
    try {
        return Json::parse(f);
    } catch (const std::exception& e) {
        throw qw::sim::ConfigError(path, e.what());
    }
}

qw::sim::Scenario load_scenario(const std::string& preset_name, const std::string& config_path) {
    if (!config_path.empty())
        return qw::sim::scenario_from_json(read_json_file(config_path));
    return qw::sim::preset(preset_name);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qwire - quantum wrapper network simulator"};
    app.require_subcommand(1);

    // run
    std::string run_preset = "fig3_modes";
    std::string run_config;
    std::string run_out = "out";
    std::uint64_t run_seed = 0;
    bool run_seed_set = false;
    bool run_check = false;
    bool run_mc = false;
    auto* run = app.add_subcommand("run", "run a scenario and export metrics");
    run->add_option("--preset", run_preset, "scenario preset name");
    run->add_option("--config", run_config, "scenario JSON file (overrides --preset)");
    run->add_option("--out", run_out, "output directory");
    run->add_option("--seed", run_seed, "override the scenario seed")
        ->each([&](const std::string&) { run_seed_set = true; });
    run->add_flag("--check", run_check, "verify post-run invariants; exit 3 on failure");
    run->add_flag("--mc", run_mc, "add Monte Carlo columns to the sweep");

    // preset
    std::string preset_name;
    auto* preset_cmd = app.add_subcommand("preset", "print a preset scenario as JSON");
    preset_cmd->add_option("name", preset_name, "preset name (omit to list)");

    // calibrate
    std::string cal_anchors;
    std::string cal_out;
    auto* cal = app.add_subcommand("calibrate", "fit the photonic model to CAR anchors");
    cal->add_option("--anchors", cal_anchors, "anchors JSON file");
    cal->add_option("--out", cal_out, "write calibration JSON here instead of stdout");

    // ctl dump
    std::string ctl_preset = "multihop";
    std::string ctl_config;
    std::uint64_t ctl_seed = 0;
    bool ctl_seed_set = false;
    auto* ctl = app.add_subcommand("ctl", "controller operations");
    auto* dump = ctl->add_subcommand("dump", "run and dump controller/node state");
    dump->add_option("--preset", ctl_preset, "scenario preset name");
    dump->add_option("--config", ctl_config, "scenario JSON file");
    dump->add_option("--seed", ctl_seed, "override the scenario seed")
        ->each([&](const std::string&) { ctl_seed_set = true; });
    ctl->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto sc = load_scenario(run_preset, run_config);
            if (run_seed_set)
                sc.seed = run_seed;
            if (run_mc)
                sc.monte_carlo = true;
            const auto report = qw::sim::run(sc);
            qw::sim::export_report(report, run_out);
            std::cout << "wrote " << run_out << "/metrics.csv, report.json, alarms.json\n";
            if (run_check) {
                const auto problems = qw::sim::check_report(report);
                for (const auto& p : problems)
                    std::cerr << "check failed: " << p << "\n";
                if (!problems.empty())
                    return kExitCheck;
                std::cout << "all checks passed\n";
            }
            return kExitOk;
        }
        if (*preset_cmd) {
            if (preset_name.empty()) {
                for (const auto& n : qw::sim::preset_names())
                    std::cout << n << "\n";
                return kExitOk;
            }
            std::cout << qw::sim::scenario_to_json(qw::sim::preset(preset_name)).dump(2)
                      << "\n";
            return kExitOk;
        }
        if (*cal) {
            qw::photonics::CalibrationAnchors anchors;
            if (!cal_anchors.empty())
                anchors = qw::sim::anchors_from_json(read_json_file(cal_anchors));
            const auto j = qw::sim::calibration_to_json(qw::photonics::calibrate(anchors));
            if (cal_out.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::ofstream f(cal_out, std::ios::binary);
                f << j.dump(2) << "\n";
            }
            return kExitOk;
        }
        if (*dump) {
            auto sc = load_scenario(ctl_preset, ctl_config);
            if (ctl_seed_set)
                sc.seed = ctl_seed;
            const auto report = qw::sim::run(sc);
            const auto j = qw::sim::report_to_json(report);
            Json out;
            out["node_tables"] = j["node_tables"];
            out["node_counters"] = j["node_counters"];
            out["link_states"] = j["link_states"];
            out["tables_converged"] = j["tables_converged"];
            std::cout << out.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const qw::sim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
