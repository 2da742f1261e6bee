// SPDX-License-Identifier: Apache-2.0
#include "pemnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pemnet/stf.hpp"

namespace pemnet
{

using nlohmann::json;

namespace
{

void reject_unknown(const json &obj, const std::string &section, std::initializer_list<const char *> keys)
{
    if (!obj.is_object())
        throw ConfigError("config section '" + section + "' must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto &[key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + section + (section.empty() ? "" : ".") + key + "'");
}

template <class T> void read(const json &obj, const char *key, T &out)
{
    if (obj.contains(key))
        out = obj.at(key).get<T>();
}

json point_list(const std::vector<Point> &pts)
{
    json arr = json::array();
    for (const auto &p : pts)
        arr.push_back({p.x, p.y});
    return arr;
}

std::vector<Point> read_points(const json &arr)
{
    std::vector<Point> out;
    for (const auto &p : arr)
    {
        if (!p.is_array() || p.size() != 2)
            throw ConfigError("points must be [x, y] pairs");
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

json scenario_json(const ScenarioConfig &s)
{
    return {{"area_width", s.area_width},
            {"area_height", s.area_height},
            {"grid_size", s.grid_size},
            {"bs_positions", point_list(s.bs_positions)},
            {"bs_broadside", s.bs_broadside},
            {"n_tx", s.n_tx},
            {"n_paths", s.n_paths},
            {"n_ues", s.n_ues},
            {"tx_power", s.tx_power},
            {"noise_power", s.noise_power},
            {"pathloss_exponent", s.pathloss_exponent},
            {"pathloss_ref_db", s.pathloss_ref_db},
            {"rng_seed", s.rng_seed}};
}

void scenario_from(const json &j, ScenarioConfig &s)
{
    reject_unknown(j, "scenario",
                   {"area_width", "area_height", "grid_size", "bs_positions", "bs_broadside", "n_tx", "n_paths",
                    "n_ues", "tx_power", "noise_power", "pathloss_exponent", "pathloss_ref_db", "rng_seed"});
    read(j, "area_width", s.area_width);
    read(j, "area_height", s.area_height);
    read(j, "grid_size", s.grid_size);
    if (j.contains("bs_positions"))
        s.bs_positions = read_points(j.at("bs_positions"));
    read(j, "bs_broadside", s.bs_broadside);
    read(j, "n_tx", s.n_tx);
    read(j, "n_paths", s.n_paths);
    read(j, "n_ues", s.n_ues);
    read(j, "tx_power", s.tx_power);
    read(j, "noise_power", s.noise_power);
    read(j, "pathloss_exponent", s.pathloss_exponent);
    read(j, "pathloss_ref_db", s.pathloss_ref_db);
    read(j, "rng_seed", s.rng_seed);
}

json traffic_json(const TrafficGroundTruth &t, const TrafficSampling &ts)
{
    json covs = json::array();
    for (const auto &c : t.gmm_covs)
        covs.push_back({{c(0, 0), c(0, 1)}, {c(1, 0), c(1, 1)}});
    return {{"gmm_means", point_list(t.gmm_means)},
            {"gmm_covs", covs},
            {"gmm_weights", t.gmm_weights},
            {"base", t.base},
            {"peak", t.peak},
            {"period_h", t.period_h},
            {"noise_std", t.noise_std},
            {"horizon_h", ts.horizon_h},
            {"step_h", ts.step_h}};
}

void traffic_from(const json &j, TrafficGroundTruth &t, TrafficSampling &ts)
{
    reject_unknown(j, "traffic",
                   {"gmm_means", "gmm_covs", "gmm_weights", "base", "peak", "period_h", "noise_std", "horizon_h",
                    "step_h"});
    if (j.contains("gmm_means"))
        t.gmm_means = read_points(j.at("gmm_means"));
    if (j.contains("gmm_covs"))
    {
        t.gmm_covs.clear();
        for (const auto &c : j.at("gmm_covs"))
        {
            Eigen::Matrix2d m;
            m << c.at(0).at(0).get<double>(), c.at(0).at(1).get<double>(), c.at(1).at(0).get<double>(),
                c.at(1).at(1).get<double>();
            t.gmm_covs.push_back(m);
        }
    }
    read(j, "gmm_weights", t.gmm_weights);
    read(j, "base", t.base);
    read(j, "peak", t.peak);
    read(j, "period_h", t.period_h);
    read(j, "noise_std", t.noise_std);
    read(j, "horizon_h", ts.horizon_h);
    read(j, "step_h", ts.step_h);
}

json to_json_value(const RunConfig &c)
{
    json schemes = json::array();
    for (Scheme s : c.bf.schemes)
        schemes.push_back(scheme_name(s));
    return {
        {"scenario", scenario_json(c.scenario)},
        {"traffic", traffic_json(c.traffic, c.traffic_sampling)},
        {"measurement",
         {{"records_per_grid_mean", c.measurement.records_per_grid_mean},
          {"coverage_fraction", c.measurement.coverage_fraction},
          {"n_snapshots", c.measurement.n_snapshots},
          {"meas_noise_std", c.measurement.meas_noise_std},
          {"horizon_h", c.measurement.horizon_h}}},
        {"ckm",
         {{"m_beams", c.ckm.m_beams},
          {"n_angles", c.ckm.n_angles},
          {"lambda_factor", c.ckm.aps.lambda_factor},
          {"tol", c.ckm.aps.tol},
          {"max_iters", c.ckm.aps.max_iters},
          {"bandwidth", c.ckm.bandwidth},
          {"interval_hours", c.ckm.interval_hours},
          {"n_intervals", c.ckm.n_intervals}}},
        {"dtm", {{"harmonics", c.ckm.harmonics}, {"ridge", c.ckm.ridge_weight}}},
        {"bf",
         {{"n0", c.bf.n0},
          {"n_tx_list", c.bf.n_tx_list},
          {"n_trials", c.bf.n_trials},
          {"pilot_noise_var", c.bf.pilot_noise_var},
          {"pem_paths", c.bf.pem_paths},
          {"eval_time_h", c.bf.eval_time_h},
          {"schemes", schemes},
          {"wmmse_max_iters", c.bf.wmmse.max_iters},
          {"wmmse_tol", c.bf.wmmse.tol}}},
        {"rxbeam",
         {{"n_tx", c.rxbeam.n_tx},
          {"d_list", c.rxbeam.d_list},
          {"eval_time_h", c.rxbeam.eval_time_h},
          {"cell", c.rxbeam.cell},
          {"unit_power", c.rxbeam.unit_power}}},
        {"gridize",
         {{"grids", c.gridize.grids},
          {"records_per_grid", c.gridize.records_per_grid},
          {"n_virtual", c.gridize.n_virtual},
          {"max_iters", c.gridize.max_iters},
          {"floor_db", c.gridize.floor_db},
          {"cell", c.gridize.cell}}},
        {"output_dir", c.output_dir}};
}

} // namespace

void RunConfig::validate() const
{
    scenario.validate();
    try
    {
        traffic.validate();
    }
    catch (const ConfigError &e)
    {
        throw ConfigError(std::string("traffic: ") + e.what());
    }
    if (!(traffic_sampling.step_h > 0.0) || traffic_sampling.horizon_h < 0.0)
        throw ConfigError("traffic sampling needs step_h > 0 and horizon_h >= 0");
    if (!(measurement.coverage_fraction > 0.0 && measurement.coverage_fraction <= 1.0))
        throw ConfigError("measurement.coverage_fraction must lie in (0, 1]");
    if (measurement.records_per_grid_mean < 0.0 || measurement.n_snapshots < 1 || measurement.meas_noise_std < 0.0 ||
        !(measurement.horizon_h > 0.0))
        throw ConfigError("invalid measurement parameters");
    PemBuildConfig c = ckm;
    c.n_tx = scenario.n_tx;
    c.validate();
    if (bf.n_trials < 1 || bf.n0 < 1 || bf.n_tx_list.empty() || bf.pilot_noise_var < 0.0 || bf.pem_paths < 0)
        throw ConfigError("invalid bf parameters");
    for (int n : bf.n_tx_list)
        if (n < 1)
            throw ConfigError("bf.n_tx_list entries must be >= 1");
    if (bf.wmmse.max_iters < 1 || !(bf.wmmse.tol > 0.0))
        throw ConfigError("invalid WMMSE parameters");
    if (rxbeam.n_tx < 1 || rxbeam.d_list.empty())
        throw ConfigError("invalid rxbeam parameters");
    for (int d : rxbeam.d_list)
        if (d < 1 || d > rxbeam.n_tx)
            throw ConfigError("rxbeam.d_list entries must lie in [1, n_tx]");
    if (rxbeam.cell < 0 || rxbeam.cell >= scenario.n_cells())
        throw ConfigError("rxbeam.cell out of range");
    if (gridize.records_per_grid < 1 || gridize.n_virtual < 1 || gridize.max_iters < 1 || !(gridize.floor_db < 0.0))
        throw ConfigError("invalid gridize parameters");
    if (gridize.cell < 0 || gridize.cell >= scenario.n_cells())
        throw ConfigError("gridize.cell out of range");
    if (output_dir.empty())
        throw ConfigError("output_dir must not be empty");
}

std::string RunConfig::to_json() const
{
    return to_json_value(*this).dump(2);
}

std::uint64_t RunConfig::hash() const
{
    auto value = to_json_value(*this);
    value.erase("output_dir");
    const std::string text = value.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text)
    {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string RunConfig::hash_hex() const
{
    std::ostringstream ss;
    ss << std::hex;
    ss.width(16);
    ss.fill('0');
    ss << hash();
    return ss.str();
}

RunConfig RunConfig::from_json(const std::string &text)
{
    json j;
    try
    {
        j = json::parse(text, nullptr, true, true);
    }
    catch (const json::parse_error &e)
    {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    reject_unknown(j, "", {"preset", "scenario", "traffic", "measurement", "ckm", "dtm", "bf", "rxbeam", "gridize",
                           "output_dir"});

    RunConfig c;
    try
    {
        const std::string preset = j.value("preset", std::string("mcbf"));
        if (preset == "mcbf")
            c = default_mcbf_config();
        else if (preset == "rxbeam")
            c = default_rxbeam_config();
        else
            throw ConfigError("unknown preset '" + preset + "' (expected mcbf or rxbeam)");

        if (j.contains("scenario"))
            scenario_from(j.at("scenario"), c.scenario);
        if (j.contains("traffic"))
            traffic_from(j.at("traffic"), c.traffic, c.traffic_sampling);
        if (j.contains("measurement"))
        {
            const auto &m = j.at("measurement");
            reject_unknown(m, "measurement",
                           {"records_per_grid_mean", "coverage_fraction", "n_snapshots", "meas_noise_std", "horizon_h"});
            read(m, "records_per_grid_mean", c.measurement.records_per_grid_mean);
            read(m, "coverage_fraction", c.measurement.coverage_fraction);
            read(m, "n_snapshots", c.measurement.n_snapshots);
            read(m, "meas_noise_std", c.measurement.meas_noise_std);
            read(m, "horizon_h", c.measurement.horizon_h);
        }
        if (j.contains("ckm"))
        {
            const auto &k = j.at("ckm");
            reject_unknown(k, "ckm",
                           {"m_beams", "n_angles", "lambda_factor", "tol", "max_iters", "bandwidth", "interval_hours",
                            "n_intervals"});
            read(k, "m_beams", c.ckm.m_beams);
            read(k, "n_angles", c.ckm.n_angles);
            read(k, "lambda_factor", c.ckm.aps.lambda_factor);
            read(k, "tol", c.ckm.aps.tol);
            read(k, "max_iters", c.ckm.aps.max_iters);
            read(k, "bandwidth", c.ckm.bandwidth);
            read(k, "interval_hours", c.ckm.interval_hours);
            read(k, "n_intervals", c.ckm.n_intervals);
        }
        if (j.contains("dtm"))
        {
            const auto &d = j.at("dtm");
            reject_unknown(d, "dtm", {"harmonics", "ridge"});
            read(d, "harmonics", c.ckm.harmonics);
            read(d, "ridge", c.ckm.ridge_weight);
        }
        if (j.contains("bf"))
        {
            const auto &b = j.at("bf");
            reject_unknown(b, "bf",
                           {"n0", "n_tx_list", "n_trials", "pilot_noise_var", "pem_paths", "eval_time_h", "schemes",
                            "wmmse_max_iters", "wmmse_tol"});
            read(b, "n0", c.bf.n0);
            read(b, "n_tx_list", c.bf.n_tx_list);
            read(b, "n_trials", c.bf.n_trials);
            read(b, "pilot_noise_var", c.bf.pilot_noise_var);
            read(b, "pem_paths", c.bf.pem_paths);
            read(b, "eval_time_h", c.bf.eval_time_h);
            if (b.contains("schemes"))
            {
                c.bf.schemes.clear();
                for (const auto &s : b.at("schemes"))
                    c.bf.schemes.push_back(scheme_from_name(s.get<std::string>()));
            }
            read(b, "wmmse_max_iters", c.bf.wmmse.max_iters);
            read(b, "wmmse_tol", c.bf.wmmse.tol);
        }
        if (j.contains("rxbeam"))
        {
            const auto &r = j.at("rxbeam");
            reject_unknown(r, "rxbeam", {"n_tx", "d_list", "eval_time_h", "cell", "unit_power"});
            read(r, "n_tx", c.rxbeam.n_tx);
            read(r, "d_list", c.rxbeam.d_list);
            read(r, "eval_time_h", c.rxbeam.eval_time_h);
            read(r, "cell", c.rxbeam.cell);
            read(r, "unit_power", c.rxbeam.unit_power);
        }
        if (j.contains("gridize"))
        {
            const auto &g = j.at("gridize");
            reject_unknown(g, "gridize", {"grids", "records_per_grid", "n_virtual", "max_iters", "floor_db", "cell"});
            read(g, "grids", c.gridize.grids);
            read(g, "records_per_grid", c.gridize.records_per_grid);
            read(g, "n_virtual", c.gridize.n_virtual);
            read(g, "max_iters", c.gridize.max_iters);
            read(g, "floor_db", c.gridize.floor_db);
            read(g, "cell", c.gridize.cell);
        }
        read(j, "output_dir", c.output_dir);
    }
    catch (const json::exception &e)
    {
        throw ConfigError(std::string("config type error: ") + e.what());
    }
    c.ckm.n_tx = c.scenario.n_tx;
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

RunConfig default_mcbf_config()
{
    RunConfig c;
    ScenarioConfig &s = c.scenario;
    s.area_width = 300.0;
    s.area_height = 300.0;
    s.grid_size = 15.0;
    s.bs_positions = {{75.0, 90.0}, {225.0, 90.0}, {150.0, 225.0}};
    s.n_tx = 64;
    s.n_paths = 4;
    s.n_ues = 36;
    s.tx_power = 1.0;
    // Short-range sites with strong line of sight, so neighbouring cells interfere noticeably.
    s.noise_power = 3e-10;
    s.pathloss_exponent = 2.0;
    s.rng_seed = 1;

    TrafficGroundTruth &t = c.traffic;
    t.gmm_means = {{150.0, 120.0}, {110.0, 170.0}, {190.0, 170.0}, {60.0, 50.0}, {240.0, 50.0}, {150.0, 260.0}};
    const Eigen::Matrix2d edge = Eigen::Matrix2d::Identity() * 400.0;
    const Eigen::Matrix2d inner = Eigen::Matrix2d::Identity() * 600.0;
    t.gmm_covs = {edge, edge, edge, inner, inner, inner};
    t.gmm_weights = {0.2, 0.2, 0.2, 0.4 / 3.0, 0.4 / 3.0, 1.0 - 0.6 - 2.0 * (0.4 / 3.0)};
    t.base = 500.0;
    t.peak = 2000.0;
    t.period_h = 24.0;
    t.noise_std = 0.01;

    // Every grid reports, so each placed user has a measured CKM entry.
    c.measurement.coverage_fraction = 1.0;
    c.ckm.n_tx = s.n_tx;
    c.output_dir = "runs/mcbf";
    return c;
}

RunConfig default_rxbeam_config()
{
    RunConfig c;
    c.scenario = rxbeam_scenario();
    c.traffic = rxbeam_traffic();
    c.ckm.n_tx = c.scenario.n_tx;
    c.rxbeam.n_tx = c.scenario.n_tx;
    c.bf.n_tx_list = {16};
    c.output_dir = "runs/rxbeam";
    return c;
}

SiteData synthesize_site(const RunConfig &config)
{
    SiteData site;
    site.world = make_world(config.scenario, config.traffic);
    const BeamCodebook codebook =
        dft_codebook(config.scenario.n_tx, config.ckm.m_beams > 0 ? config.ckm.m_beams : 2 * config.scenario.n_tx);
    Rng mr_rng(derive_seed(config.scenario.rng_seed, kStreamMr));
    site.mr = generate_mr_dataset(site.world, codebook, config.measurement, mr_rng);
    Rng traffic_rng(derive_seed(config.scenario.rng_seed, kStreamTraffic));
    site.traffic = generate_traffic_dataset(site.world, config.traffic_sampling, traffic_rng);
    return site;
}

Pem build_site_pem(const RunConfig &config, const SiteData &site, PemBuildReport *report)
{
    PemBuildConfig ckm = config.ckm;
    ckm.n_tx = config.scenario.n_tx;
    PemMetadata meta;
    meta.seed = config.scenario.rng_seed;
    meta.config_hash = config.hash();
    return build_pem(site.mr.records, site.traffic, site.world.grid_map, config.scenario.n_cells(), ckm, meta, report);
}

GridizeReport run_gridize_experiment(const RunConfig &config)
{
    const World world = make_world(config.scenario, config.traffic);
    const GridizeConfig &gc = config.gridize;
    GridizeReport report;
    report.grids = gc.grids;
    if (report.grids.empty())
    {
        // Three grids of the cell spread across its bearing range.
        auto cell_grids = world.grid_map.grids_in_cell(gc.cell);
        if (cell_grids.size() < 3)
            throw ConfigError("gridize cell has fewer than three grids");
        std::sort(cell_grids.begin(), cell_grids.end(), [&](int a, int b) {
            return world.profiles.at(gc.cell, a).angles[0] < world.profiles.at(gc.cell, b).angles[0];
        });
        report.grids = {cell_grids.front(), cell_grids[cell_grids.size() / 2], cell_grids.back()};
    }
    for (int g : report.grids)
        if (g < 0 || g >= world.grid_map.n_grids())
            throw ConfigError("gridize grid id out of range");

    const BeamCodebook codebook =
        dft_codebook(config.scenario.n_tx, config.ckm.m_beams > 0 ? config.ckm.m_beams : 2 * config.scenario.n_tx);
    Rng rng(derive_seed(config.scenario.rng_seed, kStreamGridize));
    std::vector<RsrpRecord> records;
    long id = 0;
    for (int g : report.grids)
    {
        for (int r = 0; r < gc.records_per_grid; ++r)
        {
            RsrpRecord rec;
            rec.record_id = id++;
            rec.grid_id = kUnknownGrid;
            rec.cell_id = gc.cell;
            rec.time_h = uniform01(rng) * config.measurement.horizon_h;
            rec.n_snapshots = config.measurement.n_snapshots;
            rec.rsrp = synthesize_rsrp(world.profiles.at(gc.cell, g), codebook, rec.n_snapshots,
                                       config.measurement.meas_noise_std, rng);
            records.push_back(std::move(rec));
            report.truth.push_back(g);
            report.record_ids.push_back(rec.record_id);
        }
    }
    const GridizationResult fit = gridize(records, gc.n_virtual, gc.max_iters, rng, gc.floor_db);
    report.assignments = fit.assignments;
    report.objective_trace = fit.objective_trace;
    report.purity = clustering_purity(report.assignments, report.truth);
    report.cluster_sizes.assign(static_cast<std::size_t>(gc.n_virtual), 0);
    for (int a : report.assignments)
        ++report.cluster_sizes[static_cast<std::size_t>(a)];
    return report;
}

} // namespace pemnet
