// SPDX-License-Identifier: Apache-2.0
// pemsim: build a site PEM from synthetic measurements and run the evaluation experiments.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pemnet/config.hpp"
#include "pemnet/csv.hpp"

namespace fs = std::filesystem;
using namespace pemnet;

namespace
{

struct CommonArgs
{
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
};

RunConfig load_config(const CommonArgs &args, const std::string &default_preset)
{
    RunConfig cfg;
    if (!args.config_path.empty())
        cfg = RunConfig::from_file(args.config_path);
    else
    {
        const std::string preset = args.preset.empty() ? default_preset : args.preset;
        if (preset == "mcbf")
            cfg = default_mcbf_config();
        else if (preset == "rxbeam")
            cfg = default_rxbeam_config();
        else
            throw ConfigError("unknown preset '" + preset + "'");
    }
    if (args.seed)
        cfg.scenario.rng_seed = *args.seed;
    if (args.trials)
        cfg.bf.n_trials = *args.trials;
    if (!args.out_dir.empty())
        cfg.output_dir = args.out_dir;
    cfg.validate();
    return cfg;
}

fs::path prepare_out(const RunConfig &cfg)
{
    const fs::path out = cfg.output_dir;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out))
        throw ConfigError("output directory " + out.string() + " is not writable");
    return out;
}

std::ofstream open_out(const fs::path &path)
{
    std::ofstream os(path);
    if (!os)
        throw RuntimeError("cannot write " + path.string());
    return os;
}

void write_config_copy(const RunConfig &cfg, const fs::path &out)
{
    auto os = open_out(out / "config.json");
    os << cfg.to_json() << '\n';
}

Pem obtain_pem(const RunConfig &cfg, const SiteData &site, const std::string &pem_dir)
{
    if (pem_dir.empty())
        return build_site_pem(cfg, site);
    Pem pem = load_pem(pem_dir, site.world.grid_map);
    if (pem.meta.seed != cfg.scenario.rng_seed)
        std::cerr << "warning: PEM in " << pem_dir << " was built with seed " << pem.meta.seed << ", config uses "
                  << cfg.scenario.rng_seed << '\n';
    if (pem.n_cells() != cfg.scenario.n_cells())
        throw ConfigError("PEM cell count does not match the scenario");
    return pem;
}

int cmd_build_pem(const CommonArgs &args)
{
    const RunConfig cfg = load_config(args, "mcbf");
    const fs::path out = prepare_out(cfg);
    const SiteData site = synthesize_site(cfg);
    PemBuildReport report;
    const Pem pem = build_site_pem(cfg, site, &report);
    save_pem(pem, out);
    write_config_copy(cfg, out);

    std::ostringstream text;
    text << "# config_hash=" << cfg.hash_hex() << '\n'
         << "grids=" << report.n_grids << '\n'
         << "cells=" << report.n_cells << '\n'
         << "intervals=" << report.n_intervals << '\n'
         << "rsrp_records=" << report.n_rsrp_records << '\n'
         << "aps_measured=" << report.n_measured << '\n'
         << "aps_interpolated=" << report.n_interpolated << '\n'
         << "aps_residual_mean=" << csv::fmt(report.mean_aps_residual) << '\n'
         << "aps_residual_max=" << csv::fmt(report.max_aps_residual) << '\n'
         << "traffic_models=" << report.n_traffic_models << '\n'
         << "dtm_training_rmse=" << csv::fmt(report.dtm_training_rmse) << '\n';
    {
        auto os = open_out(out / "build_report.txt");
        os << text.str();
    }
    std::cout << text.str();
    return 0;
}

int cmd_eval_mcbf(const CommonArgs &args, const std::string &pem_dir, const std::string &schemes, bool serial)
{
    RunConfig cfg = load_config(args, "mcbf");
    if (!schemes.empty())
    {
        cfg.bf.schemes.clear();
        std::stringstream ss(schemes);
        std::string name;
        while (std::getline(ss, name, ','))
            if (!name.empty())
                cfg.bf.schemes.push_back(scheme_from_name(name));
        if (cfg.bf.schemes.empty())
            throw ConfigError("--schemes selected nothing");
    }
    const fs::path out = prepare_out(cfg);
    const SiteData site = synthesize_site(cfg);
    const Pem pem = obtain_pem(cfg, site, pem_dir);

    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = derive_seed(cfg.scenario.rng_seed, kStreamMcbf);
    const McbfResults results = serial ? run_mcbf_experiment_serial(site.world, pem, cfg.bf, seed)
                                       : run_mcbf_experiment(site.world, pem, cfg.bf, seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string hash = cfg.hash_hex();
    {
        auto rows = open_out(out / "mcbf_results.csv");
        write_mcbf_rows_csv(rows, results, hash);
        auto summary = open_out(out / "mcbf_summary.csv");
        write_mcbf_summary_csv(summary, results, hash);
    }
    write_config_copy(cfg, out);

    for (const auto &r : results.summary)
        std::cout << scheme_name(r.scheme) << " n_tx=" << r.n_tx << " esr=" << r.mean_esr << " +- " << r.stderr_esr
                  << " rate=" << r.mean_rate << '\n';
    for (const auto &v : mcbf_verdicts(results))
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << " |" << v.detail << '\n';
    std::cerr << "mcbf trials finished in " << secs << " s\n";
    return 0;
}

int cmd_eval_rxbeam(const CommonArgs &args, const std::string &pem_dir)
{
    const RunConfig cfg = load_config(args, "rxbeam");
    const fs::path out = prepare_out(cfg);
    const SiteData site = synthesize_site(cfg);
    const Pem pem = obtain_pem(cfg, site, pem_dir);
    const std::string hash = cfg.hash_hex();

    std::ostringstream summary;
    summary << "# config_hash=" << hash << '\n' << "d,n_tx,mean_capture_pem,mean_capture_dft\n";
    bool all_ok = true;
    for (std::size_t i = 0; i < cfg.rxbeam.d_list.size(); ++i)
    {
        const int d = cfg.rxbeam.d_list[i];
        const RxbeamResult res = run_rxbeam_experiment(pem, d, cfg.rxbeam);
        auto map = open_out(out / ("rxbeam_map_d" + std::to_string(d) + ".csv"));
        write_rxbeam_csv(map, res, hash);
        if (i == 0)
        {
            auto first = open_out(out / "rxbeam_map.csv");
            write_rxbeam_csv(first, res, hash);
        }
        summary << d << ',' << res.summary.n_tx << ',' << csv::fmt(res.summary.mean_capture_pem) << ','
                << csv::fmt(res.summary.mean_capture_dft) << '\n';
        all_ok = all_ok && res.summary.mean_capture_pem >= res.summary.mean_capture_dft;
    }
    {
        auto os = open_out(out / "rxbeam_summary.csv");
        os << summary.str();
    }
    write_config_copy(cfg, out);
    std::cout << summary.str() << (all_ok ? "PASS" : "FAIL") << " PEM beamspace capture >= best DFT subset\n";
    return 0;
}

int cmd_eval_gridize(const CommonArgs &args)
{
    const RunConfig cfg = load_config(args, "mcbf");
    const fs::path out = prepare_out(cfg);
    const GridizeReport rep = run_gridize_experiment(cfg);
    const std::string hash = cfg.hash_hex();
    {
        auto os = open_out(out / "gridize_assignments.csv");
        csv::write_comment(os, "config_hash=" + hash);
        os << "record_id,virtual_grid,true_grid\n";
        for (std::size_t i = 0; i < rep.assignments.size(); ++i)
            os << rep.record_ids[i] << ',' << rep.assignments[i] << ',' << rep.truth[i] << '\n';
    }
    std::ostringstream text;
    text << "# config_hash=" << hash << '\n' << "purity=" << csv::fmt(rep.purity) << '\n' << "true_grids=";
    for (std::size_t i = 0; i < rep.grids.size(); ++i)
        text << (i ? ";" : "") << rep.grids[i];
    text << "\ncluster_sizes=";
    for (std::size_t i = 0; i < rep.cluster_sizes.size(); ++i)
        text << (i ? ";" : "") << rep.cluster_sizes[i];
    text << "\niterations=" << rep.objective_trace.size() << '\n';
    {
        auto os = open_out(out / "gridize_report.txt");
        os << text.str();
    }
    write_config_copy(cfg, out);
    std::cout << text.str();
    return 0;
}

void add_common(CLI::App *cmd, CommonArgs &args, bool with_trials)
{
    cmd->add_option("--config", args.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--preset", args.preset, "built-in configuration when --config is absent (mcbf, rxbeam)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides output_dir)");
    cmd->add_option("--seed", args.seed, "master seed (overrides scenario.rng_seed)");
    if (with_trials)
        cmd->add_option("--trials", args.trials, "Monte Carlo trials per array size")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"pemnet site-database simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string pem_dir;
    std::string schemes;
    bool serial = false;

    auto *build = app.add_subcommand("build-pem", "synthesize measurements and build the site PEM");
    add_common(build, args, false);

    auto *mcbf = app.add_subcommand("eval-mcbf", "multi-cell beamforming comparison");
    add_common(mcbf, args, true);
    mcbf->add_option("--pem", pem_dir, "PEM directory from build-pem (rebuilt in memory when absent)");
    mcbf->add_option("--schemes", schemes, "comma-separated scheme subset");
    mcbf->add_flag("--serial", serial, "run trials on one thread");

    auto *rx = app.add_subcommand("eval-rxbeam", "receive beamspace from the occurrence-weighted covariance");
    add_common(rx, args, false);
    rx->add_option("--pem", pem_dir, "PEM directory from build-pem (rebuilt in memory when absent)");

    auto *grid = app.add_subcommand("eval-gridize", "cluster untagged measurements into virtual grids");
    add_common(grid, args, false);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try
    {
        if (*build)
            return cmd_build_pem(args);
        if (*mcbf)
            return cmd_eval_mcbf(args, pem_dir, schemes, serial);
        if (*rx)
            return cmd_eval_rxbeam(args, pem_dir);
        return cmd_eval_gridize(args);
    }
    catch (const ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
