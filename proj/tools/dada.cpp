// dada: dataset generation, simulation, sweeps and reports from one config.
//
// Exit codes: 0 ok, 1 runtime failure, 2 config or usage error, 3 IO error,
// 4 incomplete input.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dada/config.hpp"
#include "dada/error.hpp"
#include "dada/eval.hpp"
#include "dada/io.hpp"
#include "dada/sim.hpp"
#include "dada/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitIncomplete = 4;

struct IncompleteInput : std::runtime_error {
    std::vector<std::string> missing;
    explicit IncompleteInput(std::vector<std::string> names)
        : std::runtime_error("incomplete input"), missing(std::move(names)) {}
};

dada::RunConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw dada::IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    auto rc = dada::parse_config_text(buf.str());
    if (seed) dada::apply_seed_override(rc.sim, *seed);
    return rc;
}

void write_manifest(const fs::path& out, const std::string& command, const dada::RunConfig& rc,
                    const std::vector<std::string>& artifacts, std::chrono::steady_clock::time_point start) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    const json manifest{{"tool", "dada"},
                        {"version", dada::kToolVersion},
                        {"command", command},
                        {"config", dada::to_json(rc)},
                        {"seeds", dada::seeds_json(rc.sim)},
                        {"artifacts", artifacts},
                        {"wall_time_ms", std::round(ms)}};
    dada::io::write_atomic(out / "manifest.json", manifest.dump(1) + "\n");
}

int cmd_generate(const dada::RunConfig& rc, const fs::path& out) {
    const auto start = std::chrono::steady_clock::now();
    const auto ds = dada::simulation_dataset(rc.sim);
    dada::io::write_dataset(out, ds);
    write_manifest(out, "generate", rc, {"dataset.csv", "labels.json"}, start);
    std::cout << "wrote " << ds.sensors << " sensors x " << ds.days << " days (" << ds.label_count()
              << " labeled slots) to " << out.string() << "\n";
    return kExitOk;
}

int cmd_simulate(const dada::RunConfig& rc, const fs::path& out) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = dada::run_simulation(rc.sim);
    dada::io::write_sim_result(out, result);
    std::vector<std::string> artifacts = dada::io::result_artifacts();
    artifacts.push_back("models/bootstrap.bin");
    for (const auto& ev : result.retrains) {
        char name[48];
        std::snprintf(name, sizeof name, "models/update_day_%04d.bin", ev.day);
        artifacts.emplace_back(name);
    }
    write_manifest(out, "simulate", rc, artifacts, start);
    std::cout << "simulated " << result.eval_days() << " days, " << result.retrains.size() << " model updates, "
              << "flagged fraction " << result.flagged_fraction() << "\n";
    return kExitOk;
}

int cmd_sweep(const dada::RunConfig& rc, const std::string& kind, const fs::path& out, int jobs) {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out);
    dada::SweepOptions options;
    options.jobs = jobs;
    options.cache_dir = out;
    options.progress = [](const std::string& name) { std::cerr << "done " << name << "\n"; };

    json summary;
    std::string csv_name;
    if (kind == "heatmap") {
        if (rc.sweep.heatmap.mu_v.empty() || rc.sweep.heatmap.var_v.empty())
            throw dada::ConfigError("sweep.heatmap", "missing required section");
        const auto r = dada::sweep_heatmap(rc.sim, rc.sweep.heatmap, options);
        csv_name = "heatmap.csv";
        dada::io::write_atomic(out / csv_name, dada::io::heatmap_csv(r));
        summary = dada::io::summary_json(r);
    } else if (kind == "frequency") {
        if (rc.sweep.frequency_k.empty()) throw dada::ConfigError("sweep.frequency", "missing required section");
        const auto r = dada::sweep_frequency(rc.sim, rc.sweep.frequency_k, options);
        csv_name = "freq_sweep.csv";
        dada::io::write_atomic(out / csv_name, dada::io::frequency_csv(r));
        summary = dada::io::summary_json(r);
    } else {
        if (rc.sweep.adaptivity_k.empty() || rc.sweep.adaptivity_seeds.empty())
            throw dada::ConfigError("sweep.adaptivity", "missing required section");
        const auto r = dada::sweep_adaptivity(rc.sim, rc.sweep.adaptivity_k, rc.sweep.adaptivity_seeds, options);
        csv_name = "adaptivity.csv";
        dada::io::write_atomic(out / csv_name, dada::io::adaptivity_csv(r));
        summary = dada::io::summary_json(r);
    }
    summary["config"] = dada::to_json(rc);
    dada::io::write_atomic(out / "summary.json", summary.dump(1) + "\n");
    write_manifest(out, "sweep " + kind, rc, {csv_name, "summary.json", "cells/"}, start);
    std::cout << "wrote " << (out / csv_name).string() << "\n";
    return kExitOk;
}

std::string fmt(double v, int precision = 4) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

json simulate_summary(const fs::path& dir, const json& manifest) {
    const auto missing = dada::io::missing_artifacts(dir);
    if (!missing.empty()) throw IncompleteInput(missing);
    const auto rc = dada::parse_config(manifest.at("config"));
    const auto r = dada::io::read_sim_result(dir);
    const auto m = dada::measure(r, rc.sim.threshold);
    const auto comms = dada::communication_report(r);
    return {{"kind", "simulate"},
            {"metrics", dada::detail::metrics_json(m)},
            {"threshold_p", rc.sim.threshold.p},
            {"bootstrap_rmse", r.bootstrap_rmse},
            {"model_updates", r.retrains.size()},
            {"communication", dada::io::comm_report_json(comms)},
            {"config", manifest.at("config")}};
}

void print_table(const json& s) {
    const auto kind = s.at("kind").get<std::string>();
    auto num = [](const json& j) { return j.is_null() ? std::string("n/a") : fmt(j.get<double>()); };
    if (kind == "simulate") {
        const auto& m = s.at("metrics");
        std::cout << "metric                    value\n"
                  << "auc                       " << num(m.at("auc")) << "\n"
                  << "tpr (p=" << fmt(s.at("threshold_p").get<double>(), 2) << ")              " << num(m.at("tpr"))
                  << "\n"
                  << "fpr (p=" << fmt(s.at("threshold_p").get<double>(), 2) << ")              " << num(m.at("fpr"))
                  << "\n"
                  << "flagged fraction          " << num(m.at("flagged_fraction")) << "\n"
                  << "bootstrap rmse            " << num(s.at("bootstrap_rmse")) << "\n"
                  << "model updates             " << s.at("model_updates").get<std::size_t>() << "\n"
                  << "sensor-to-sensor messages "
                  << s.at("communication").at("sensor_to_sensor_messages").get<std::uint64_t>() << "\n";
    } else if (kind == "heatmap") {
        std::cout << "mu_v        var_v       auc\n";
        for (const auto& c : s.at("cells")) {
            char line[96];
            std::snprintf(line, sizeof line, "%-11s %-11s %s\n", fmt(c.at("mu_v").get<double>()).c_str(),
                          fmt(c.at("var_v").get<double>()).c_str(), num(c.at("auc")).c_str());
            std::cout << line;
        }
    } else if (kind == "frequency") {
        std::cout << "k      auc     tpr     fpr\n";
        for (const auto& c : s.at("cells")) {
            char line[96];
            std::snprintf(line, sizeof line, "%-6d %-7s %-7s %s\n", c.at("k").get<int>(), num(c.at("auc")).c_str(),
                          num(c.at("tpr")).c_str(), num(c.at("fpr")).c_str());
            std::cout << line;
        }
        std::cout << "auc spread " << num(s.at("auc_spread")) << "\n";
    } else {
        std::cout << "k      scheme       median_tpr  median_fpr  median_auc\n";
        for (const auto& m : s.at("medians")) {
            char line[128];
            std::snprintf(line, sizeof line, "%-6d %-12s %-11s %-11s %s\n", m.at("k").get<int>(),
                          m.at("scheme").get<std::string>().c_str(), num(m.at("median_tpr")).c_str(),
                          num(m.at("median_fpr")).c_str(), num(m.at("median_auc")).c_str());
            std::cout << line;
        }
    }
}

int cmd_report(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw IncompleteInput({"manifest.json"});
    const auto manifest = dada::io::read_json(dir / "manifest.json");
    const auto command = manifest.at("command").get<std::string>();
    json summary;
    if (command == "simulate") {
        summary = simulate_summary(dir, manifest);
        dada::io::write_atomic(dir / "summary.json", summary.dump(1) + "\n");
    } else if (command.rfind("sweep ", 0) == 0) {
        // sweeps write their own summary; the report only reads it
        std::vector<std::string> missing;
        for (const auto& a : manifest.at("artifacts")) {
            const auto name = a.get<std::string>();
            if (!fs::exists(dir / name)) missing.push_back(name);
        }
        if (!missing.empty()) throw IncompleteInput(missing);
        summary = dada::io::read_json(dir / "summary.json");
    } else {
        throw dada::IoError("report: nothing to report for command '" + command + "'");
    }
    print_table(summary);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed autoencoder anomaly detection simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, sweep_kind, report_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", config_path, "JSON config, or a manifest.json from an earlier run")
            ->required();
        sub->add_option("--out,-o", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "override every module seed (seed + hash of module tag)");
    };

    auto* generate = app.add_subcommand("generate", "write a synthetic labeled dataset");
    add_common(generate);
    auto* simulate = app.add_subcommand("simulate", "run one simulation and write its result directory");
    add_common(simulate);
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    sweep->add_option("kind", sweep_kind, "heatmap | frequency | adaptivity")
        ->required()
        ->check(CLI::IsMember({"heatmap", "frequency", "adaptivity"}));
    add_common(sweep);
    sweep->add_option("--jobs,-j", jobs, "cells run in parallel")->check(CLI::PositiveNumber);
    auto* report = app.add_subcommand("report", "summarize a finished run directory");
    report->add_option("dir", report_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (report->parsed()) return cmd_report(report_dir);
        const auto rc = load_config(config_path, seed);
        if (generate->parsed()) return cmd_generate(rc, out_dir);
        if (simulate->parsed()) return cmd_simulate(rc, out_dir);
        return cmd_sweep(rc, sweep_kind, out_dir, jobs);
    } catch (const dada::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IncompleteInput& e) {
        std::cerr << "incomplete input, missing:";
        for (const auto& m : e.missing) std::cerr << " " << m;
        std::cerr << "\n";
        return kExitIncomplete;
    } catch (const dada::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
