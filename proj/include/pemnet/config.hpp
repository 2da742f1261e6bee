// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pemnet/bf.hpp"
#include "pemnet/env.hpp"
#include "pemnet/meas.hpp"
#include "pemnet/pem.hpp"
#include "pemnet/rxbeam.hpp"

namespace pemnet
{

struct GridizeConfig
{
    std::vector<int> grids; // empty: three grids of cell 0 spread in bearing
    int records_per_grid = 20;
    int n_virtual = 3;
    int max_iters = 100;
    double floor_db = -30.0;
    int cell = 0;
};

// Everything one run needs. Serialized as JSON with one object per section:
// scenario, traffic, measurement, ckm, dtm, bf, rxbeam, gridize, plus output_dir.
struct RunConfig
{
    ScenarioConfig scenario;
    TrafficGroundTruth traffic;
    TrafficSampling traffic_sampling;
    MrSampling measurement;
    PemBuildConfig ckm; // ckm + dtm parameters; n_tx follows scenario.n_tx
    McbfConfig bf;
    RxbeamConfig rxbeam;
    GridizeConfig gridize;
    std::string output_dir = "runs/default";

    void validate() const;
    std::string to_json() const;
    // FNV-1a of the canonical JSON text without output_dir.
    std::uint64_t hash() const;
    std::string hash_hex() const;

    static RunConfig from_json(const std::string &text);
    static RunConfig from_file(const std::filesystem::path &path);
};

// Three cells, 36 UEs, n_p = 4, n0 = 500, n_tx in {8, 16, 32, 64}.
RunConfig default_mcbf_config();
// 150 m x 150 m, corner BS, three user clusters, n_tx = 16, d in {2, 4, 8}.
RunConfig default_rxbeam_config();

struct SiteData
{
    World world;
    MrDataset mr;
    std::vector<TrafficRecord> traffic;
};

SiteData synthesize_site(const RunConfig &config);
Pem build_site_pem(const RunConfig &config, const SiteData &site, PemBuildReport *report = nullptr);

struct GridizeReport
{
    double purity = 0.0;
    std::vector<int> grids;
    std::vector<int> cluster_sizes;
    std::vector<long> record_ids;
    std::vector<int> assignments;
    std::vector<int> truth;
    std::vector<double> objective_trace;
};

GridizeReport run_gridize_experiment(const RunConfig &config);

// Stream ids for derive_seed().
inline constexpr std::uint64_t kStreamMr = 0x6d72;
inline constexpr std::uint64_t kStreamTraffic = 0x7466;
inline constexpr std::uint64_t kStreamMcbf = 0x6d63;
inline constexpr std::uint64_t kStreamGridize = 0x677a;

} // namespace pemnet
