// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pemnet/common.hpp"

namespace pemnet
{

struct TrafficRecord
{
    int grid_id = 0;
    double time_h = 0.0;
    double volume = 0.0;
    int active_count = 0;
};

// Per-grid periodic regression on daily and weekly Fourier features.
struct TrafficModel
{
    static constexpr double kPeriodDay = 24.0;
    static constexpr double kPeriodWeek = 168.0;

    int harmonics = 0;
    rvec coefficients; // [intercept, (sin,cos daily, sin,cos weekly) per harmonic]
    double residual_var = 0.0;
    double ridge_weight = 0.0;

    static TrafficModel zero();
};

struct TrafficPrediction
{
    double mean = 0.0;
    double variance = 0.0;
};

// Feature row [1, sin(2 pi k t/24), cos(2 pi k t/24), sin(2 pi k t/168), cos(2 pi k t/168)]_{k=1..H}.
rvec traffic_features(double t_h, int harmonics);

// Falls back to a mean-only model when there are fewer than 1 + 4H records.
TrafficModel fit_traffic_model(std::span<const TrafficRecord> records, int harmonics, double ridge_weight);

TrafficPrediction predict_traffic(const TrafficModel &model, double t_h);

// q_g = mean_g(t) / sum mean(t); grids without a model contribute 0.
rvec occurrence_map(std::span<const std::optional<TrafficModel>> models, double t_h);

// Root-mean-square error of a model on records.
double traffic_rmse(const TrafficModel &model, std::span<const TrafficRecord> records);

} // namespace pemnet
