// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "pemnet/meas.hpp"

namespace pemnet
{

struct GridizationModel
{
    std::vector<rvec> centroids;
    double floor_db = -30.0;

    int n_virtual() const { return static_cast<int>(centroids.size()); }
};

struct GridizationResult
{
    GridizationModel model;
    std::vector<int> assignments;
    std::vector<double> objective_trace; // within-cluster sum of squares after each assignment pass
};

// Peak-normalized dB fingerprint: max(10 log10(r_m / max r), floor_db).
rvec fingerprint(const RsrpRecord &record, double floor_db);

GridizationResult gridize(std::span<const RsrpRecord> records, int n_virtual, int max_iters, Rng &rng,
                          double floor_db = -30.0);

int assign_stf(const RsrpRecord &record, const GridizationModel &model);

// Fraction of samples whose cluster's majority label equals their own label.
double clustering_purity(std::span<const int> assignments, std::span<const int> truth);

} // namespace pemnet
