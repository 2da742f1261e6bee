// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pemnet/common.hpp"

namespace pemnet
{

struct ScenarioConfig
{
    double area_width = 300.0;  // m
    double area_height = 300.0; // m
    double grid_size = 15.0;    // m
    std::vector<Point> bs_positions;
    // Azimuth of each array's broadside (rad, counter-clockwise from +x).
    // Empty means every array faces the area center.
    std::vector<double> bs_broadside;
    int n_tx = 64;
    int n_paths = 4;
    int n_ues = 36;
    double tx_power = 1.0;       // W per cell
    double noise_power = 1e-11;  // W
    double pathloss_exponent = 3.0;
    double pathloss_ref_db = 30.0;
    std::uint64_t rng_seed = 1;

    int n_cells() const { return static_cast<int>(bs_positions.size()); }
    double broadside(int cell) const;

    // Throws ConfigError on the first violated invariant.
    void validate() const;
};

struct GridMap
{
    int n_x = 0;
    int n_y = 0;
    double grid_size = 0.0;
    std::vector<Point> centers; // row-major, id = iy * n_x + ix
    std::vector<int> cell_of_grid;

    int n_grids() const { return n_x * n_y; }
    // Grid containing p; points on the far boundary belong to the last tile.
    int grid_of(const Point &p) const;
    std::vector<int> grids_in_cell(int cell) const;
};

struct PathProfile
{
    std::vector<double> angles; // rad in (-pi/2, pi/2) from broadside
    std::vector<double> powers; // linear gain at unit tx power
    std::vector<double> delays; // s

    std::size_t n_paths() const { return angles.size(); }
    double total_power() const;
};

// Ground-truth large-scale channel for every (cell, grid) link.
struct ChannelProfiles
{
    int n_cells = 0;
    int n_grids = 0;
    std::vector<PathProfile> links; // index cell * n_grids + grid

    const PathProfile &at(int cell, int grid) const { return links[static_cast<std::size_t>(cell) * n_grids + grid]; }
};

struct TrafficGroundTruth
{
    std::vector<Point> gmm_means;
    std::vector<Eigen::Matrix2d> gmm_covs;
    std::vector<double> gmm_weights;
    double base = 500.0;
    double peak = 2000.0;
    double period_h = 24.0;
    double noise_std = 0.01;

    void validate() const;
    double amplitude(double t_h) const;
    double density(const Point &p) const;
};

struct UePlacement
{
    int grid = 0;
    Point position;
};

// Standard half-wavelength ULA response, entry m = exp(i*pi*m*sin(theta)).
cvec steering_vector(double theta, int n_tx);

GridMap build_grid_map(const ScenarioConfig &config);

// Log-distance gain; distances below 1 m are clipped to 1 m.
double pathloss_gain(const ScenarioConfig &config, double distance_m);

// Bearing of `target` seen from the array of `cell`, folded into (-pi/2, pi/2).
double array_bearing(const ScenarioConfig &config, int cell, const Point &target);

ChannelProfiles generate_path_profiles(const ScenarioConfig &config, const GridMap &grid_map, Rng &rng);

cvec realize_channel(const PathProfile &profile, int n_tx, Rng &rng);

// Covariance of realize_channel(): sum_p beta_p a(theta_p) a(theta_p)^H.
cmat profile_covariance(const PathProfile &profile, int n_tx);

// `noise` = false returns the noiseless field amp(t) * density.
double traffic_volume(const TrafficGroundTruth &truth, const Point &grid_center, double t_h, Rng &rng,
                      bool noise = true);

std::vector<UePlacement> place_active_users(const rvec &occurrence, int n_ues, const GridMap &grid_map, Rng &rng);

// Everything a run needs from the synthetic physical world.
struct World
{
    ScenarioConfig config;
    GridMap grid_map;
    ChannelProfiles profiles;
    TrafficGroundTruth traffic;
};

World make_world(const ScenarioConfig &config, const TrafficGroundTruth &traffic);

} // namespace pemnet
