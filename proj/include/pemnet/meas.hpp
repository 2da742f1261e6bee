// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <vector>

#include "pemnet/dtm.hpp"
#include "pemnet/env.hpp"

namespace pemnet
{

// M unit-norm beams stored as the columns of an n_tx x M matrix.
struct BeamCodebook
{
    cmat beams;

    int n_tx() const { return static_cast<int>(beams.rows()); }
    int m_beams() const { return static_cast<int>(beams.cols()); }
};

// One MR-style report: multi-beam RSRP of one cell seen from one location.
struct RsrpRecord
{
    long record_id = 0;
    int grid_id = kUnknownGrid;
    int cell_id = 0;
    double time_h = 0.0;
    int n_snapshots = 1;
    rvec rsrp; // linear W, one entry per beam
};

struct MrSampling
{
    double records_per_grid_mean = 3.0;
    double coverage_fraction = 0.6;
    int n_snapshots = 64;
    double meas_noise_std = 0.0; // W
    double horizon_h = 24.0;
};

struct MrDataset
{
    std::vector<RsrpRecord> records; // truth-tagged

    // Same records with every grid tag replaced by kUnknownGrid.
    std::vector<RsrpRecord> untagged() const;
};

// Beam m = exp(i*pi*n*u_m)/sqrt(n_tx), u_m = -1 + (2m+1)/M.
BeamCodebook dft_codebook(int n_tx, int m_beams);

// Noiseless closed form E[rsrp_m] = sum_p beta_p |b_m^H a(theta_p)|^2.
rvec expected_rsrp(const PathProfile &profile, const BeamCodebook &codebook);

rvec synthesize_rsrp(const PathProfile &profile, const BeamCodebook &codebook, int n_snapshots, double meas_noise_std,
                     Rng &rng);

// Every covered grid reports Poisson(mean) (at least one) records; each report carries one RsrpRecord per cell.
MrDataset generate_mr_dataset(const World &world, const BeamCodebook &codebook, const MrSampling &sampling, Rng &rng);

struct TrafficSampling
{
    double horizon_h = 336.0;
    double step_h = 1.0;
};

std::vector<TrafficRecord> generate_traffic_dataset(const World &world, const TrafficSampling &sampling, Rng &rng);

void write_mr_csv(std::ostream &os, std::span<const RsrpRecord> records);
void write_traffic_csv(std::ostream &os, std::span<const TrafficRecord> records);

} // namespace pemnet
