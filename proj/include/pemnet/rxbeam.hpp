// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pemnet/pem.hpp"

namespace pemnet
{

// d orthonormal receive directions stored as columns.
struct Beamspace
{
    cmat columns;

    int dim() const { return static_cast<int>(columns.cols()); }
};

// R_w = sum_g q_g R_g over every grid, using the CKM of `cell`.
// With `unit_power` each local covariance is scaled to unit trace first (uplink power control).
cmat weighted_covariance(const Pem &pem, double t_h, int n_tx, int cell = 0, bool unit_power = false);
cmat weighted_covariance(std::span<const cmat> local, const rvec &occurrence);

// Top-d eigenvectors by descending eigenvalue; each column's first nonzero entry is real positive.
Beamspace dominant_beamspace(const cmat &r, int d);

// trace(V^H R V) / trace(R) with R = aps_to_covariance(aps).
double capture_ratio(const Beamspace &beamspace, const rvec &aps, const AngularGrid &grid);
double capture_ratio(const Beamspace &beamspace, const cmat &r);

struct RxbeamConfig
{
    int n_tx = 16;
    std::vector<int> d_list{2, 4, 8};
    double eval_time_h = 18.0;
    int cell = 0;
    bool unit_power = true;
};

struct RxbeamRow
{
    int grid = 0;
    double x = 0.0;
    double y = 0.0;
    double occurrence = 0.0;
    double capture_pem = 0.0;
    double capture_dft = 0.0;
};

struct RxbeamSummary
{
    int d = 0;
    int n_tx = 0;
    double mean_capture_pem = 0.0;
    double mean_capture_dft = 0.0;
};

struct RxbeamResult
{
    std::vector<RxbeamRow> rows;
    RxbeamSummary summary;
    Beamspace pem_beams;
    Beamspace dft_beams;
};

// The d beams of the n_tx-beam DFT codebook with the highest occurrence-weighted capture.
Beamspace best_dft_subset(std::span<const cmat> local, const rvec &occurrence, int d);

RxbeamResult run_rxbeam_experiment(const Pem &pem, int d, const RxbeamConfig &config);

// 150 m x 150 m area, single BS at the lower-left corner facing the diagonal.
ScenarioConfig rxbeam_scenario();
// Three dense user clusters.
TrafficGroundTruth rxbeam_traffic();

void write_rxbeam_csv(std::ostream &os, const RxbeamResult &result, const std::string &config_hash);

} // namespace pemnet
