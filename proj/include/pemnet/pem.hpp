// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pemnet/ckm.hpp"
#include "pemnet/dtm.hpp"
#include "pemnet/env.hpp"
#include "pemnet/meas.hpp"

namespace pemnet
{

struct PemBuildConfig
{
    int n_tx = 64;     // array the MR beams were measured with
    int m_beams = 0;   // 0: 2 * n_tx
    int n_angles = 0;  // 0: 4 * n_tx
    ApsBatchOptions aps;
    double bandwidth = 0.0; // m; 0: 2 * grid size
    double interval_hours = 24.0;
    int n_intervals = 1;
    int harmonics = 2;
    double ridge_weight = 1e-6;
    bool parallel = true;

    int resolved_m_beams() const { return m_beams > 0 ? m_beams : 2 * n_tx; }
    int resolved_n_angles() const { return n_angles > 0 ? n_angles : 4 * n_tx; }
    void validate() const;
};

struct PemMetadata
{
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    int n_grids = 0;
    int n_intervals = 0;

    bool operator==(const PemMetadata &) const = default;
};

// The site database: one CKM per BS plus one traffic model per grid.
struct Pem
{
    GridMap grid_map;
    AngularGrid angular_grid;
    int n_tx = 0;
    double interval_hours = 24.0;
    int n_intervals = 1;
    std::vector<CkmStore> ckm;        // per cell
    std::vector<TrafficModel> dtm;    // per grid; grids without traffic records hold TrafficModel::zero()
    PemMetadata meta;

    int n_cells() const { return static_cast<int>(ckm.size()); }
    int n_grids() const { return grid_map.n_grids(); }
    // Interval containing t; the interval sequence repeats with period n_intervals * interval_hours.
    int interval_of(double t_h) const;
    rvec occurrence(double t_h) const;

    bool operator==(const Pem &other) const;
};

struct PemResponse
{
    ApsEstimate aps;
    cmat covariance;
    double traffic_mean = 0.0;
    double traffic_var = 0.0;
    double occurrence_weight = 0.0;
    Provenance provenance = Provenance::measured;

    bool operator==(const PemResponse &other) const;
};

struct PemBuildReport
{
    int n_grids = 0;
    int n_cells = 0;
    int n_intervals = 0;
    std::size_t n_measured = 0;
    std::size_t n_interpolated = 0;
    std::size_t n_rsrp_records = 0;
    double mean_aps_residual = 0.0; // ||A p - y|| / ||y|| over measured groups
    double max_aps_residual = 0.0;
    int n_traffic_models = 0;
    double dtm_training_rmse = 0.0;
};

rvec occurrence_map(std::span<const TrafficModel> models, double t_h);

Pem build_pem(std::span<const RsrpRecord> mr, std::span<const TrafficRecord> traffic, const GridMap &grid_map,
              int n_cells, const PemBuildConfig &config, const PemMetadata &meta, PemBuildReport *report = nullptr);

// `cell` < 0 selects the serving cell of z.
PemResponse query(const Pem &pem, int z, double t_h, int cell = -1);

// Full batch reconstruction; the input Pem is not touched.
Pem rebuild(const Pem &pem, std::span<const RsrpRecord> mr, std::span<const TrafficRecord> traffic,
            const PemBuildConfig &config);

// Writes ckm.csv, dtm.csv and meta.txt into `dir`.
void save_pem(const Pem &pem, const std::filesystem::path &dir);
// Reads a directory written by save_pem(); the grid map comes from the caller's scenario.
Pem load_pem(const std::filesystem::path &dir, const GridMap &grid_map);

} // namespace pemnet
