// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pemnet/config.hpp"

using namespace pemnet;

TEST_CASE("JSON round trip keeps the hash")
{
    for (const RunConfig &cfg : {default_mcbf_config(), default_rxbeam_config()})
    {
        CHECK_NOTHROW(cfg.validate());
        const std::string text = cfg.to_json();
        const RunConfig back = RunConfig::from_json(text);
        CHECK(back.to_json() == text);
        CHECK(back.hash() == cfg.hash());
        CHECK(cfg.hash_hex().size() == 16);
    }
    CHECK(default_mcbf_config().hash() != default_rxbeam_config().hash());
    RunConfig moved = default_mcbf_config();
    moved.output_dir = "elsewhere";
    CHECK(moved.hash() == default_mcbf_config().hash());
}

TEST_CASE("partial JSON overrides the preset")
{
    const RunConfig cfg = RunConfig::from_json(R"({"preset": "mcbf", "scenario": {"rng_seed": 9}, "bf": {"n_trials": 3}})");
    CHECK(cfg.scenario.rng_seed == 9);
    CHECK(cfg.bf.n_trials == 3);
    CHECK(cfg.scenario.n_tx == default_mcbf_config().scenario.n_tx);
    RunConfig base = default_mcbf_config();
    base.scenario.rng_seed = 9;
    base.bf.n_trials = 3;
    CHECK(cfg.hash() == base.hash());

    const RunConfig rx = RunConfig::from_json(R"({"preset": "rxbeam"})");
    CHECK(rx.hash() == default_rxbeam_config().hash());
}

TEST_CASE("invalid configurations are rejected")
{
    CHECK_THROWS_AS(RunConfig::from_json(R"({"scenario": {"n_tx": 8, "bogus": 1}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"nonsense": {}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json("{not json"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"scenario": {"n_tx": "eight"}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"preset": "other"})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"bf": {"schemes": ["MCBF_IDEAL", "WHAT"]}})"), ConfigError);

    RunConfig cfg = default_mcbf_config();
    cfg.scenario.n_tx = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_mcbf_config();
    cfg.traffic.gmm_weights[0] += 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_mcbf_config();
    cfg.bf.n_trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_mcbf_config();
    cfg.rxbeam.d_list = {32};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("files and site synthesis")
{
    const auto path = std::filesystem::temp_directory_path() / "pemnet_cfg_test.json";
    {
        std::ofstream os(path);
        os << default_rxbeam_config().to_json();
    }
    CHECK(RunConfig::from_file(path).hash() == default_rxbeam_config().hash());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(RunConfig::from_file(path), ConfigError);

    RunConfig cfg = default_rxbeam_config();
    cfg.ckm.aps.max_iters = 200;
    const SiteData a = synthesize_site(cfg);
    const SiteData b = synthesize_site(cfg);
    REQUIRE(a.mr.records.size() == b.mr.records.size());
    CHECK(a.traffic.size() == b.traffic.size());
    for (std::size_t i = 0; i < a.mr.records.size(); ++i)
        CHECK(a.mr.records[i].rsrp == b.mr.records[i].rsrp);
    PemBuildReport rep;
    const Pem pem = build_site_pem(cfg, a, &rep);
    CHECK(pem.meta.seed == cfg.scenario.rng_seed);
    CHECK(pem.meta.config_hash == cfg.hash());
    CHECK(pem.n_tx == cfg.scenario.n_tx);
}

TEST_CASE("gridization experiment")
{
    RunConfig cfg = default_rxbeam_config();
    const GridizeReport rep = run_gridize_experiment(cfg);
    CHECK(rep.grids.size() == 3);
    CHECK(rep.assignments.size() == 3u * static_cast<std::size_t>(cfg.gridize.records_per_grid));
    CHECK(rep.purity >= 0.9);
    int total = 0;
    for (int s : rep.cluster_sizes)
        total += s;
    CHECK(total == static_cast<int>(rep.assignments.size()));
}
