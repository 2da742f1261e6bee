// SPDX-License-Identifier: Apache-2.0
#include "pemnet/dtm.hpp"

#include <cmath>

namespace pemnet
{

TrafficModel TrafficModel::zero()
{
    TrafficModel m;
    m.coefficients = rvec::Zero(1);
    return m;
}

rvec traffic_features(double t_h, int harmonics)
{
    rvec f(1 + 4 * harmonics);
    f[0] = 1.0;
    for (int k = 1; k <= harmonics; ++k)
    {
        const double wd = 2.0 * kPi * k * t_h / TrafficModel::kPeriodDay;
        const double ww = 2.0 * kPi * k * t_h / TrafficModel::kPeriodWeek;
        const int base = 1 + 4 * (k - 1);
        f[base] = std::sin(wd);
        f[base + 1] = std::cos(wd);
        f[base + 2] = std::sin(ww);
        f[base + 3] = std::cos(ww);
    }
    return f;
}

TrafficModel fit_traffic_model(std::span<const TrafficRecord> records, int harmonics, double ridge_weight)
{
    if (records.empty())
        throw std::invalid_argument("cannot fit a traffic model without records");
    if (harmonics < 0 || ridge_weight < 0.0)
        throw std::invalid_argument("harmonics and ridge_weight must be non-negative");

    const auto n = static_cast<Eigen::Index>(records.size());
    if (n < 1 + 4 * harmonics)
        harmonics = 0;
    const int p = 1 + 4 * harmonics;

    rmat x(n, p);
    rvec y(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        x.row(i) = traffic_features(records[static_cast<std::size_t>(i)].time_h, harmonics).transpose();
        y[i] = records[static_cast<std::size_t>(i)].volume;
    }

    // Intercept is left unpenalized.
    rmat gram = x.transpose() * x;
    for (int j = 1; j < p; ++j)
        gram(j, j) += ridge_weight;

    TrafficModel model;
    model.harmonics = harmonics;
    model.ridge_weight = ridge_weight;
    model.coefficients = gram.ldlt().solve(x.transpose() * y);
    const rvec residual = y - x * model.coefficients;
    model.residual_var = residual.squaredNorm() / static_cast<double>(n);
    return model;
}

TrafficPrediction predict_traffic(const TrafficModel &model, double t_h)
{
    const double mean = traffic_features(t_h, model.harmonics).dot(model.coefficients);
    return {std::max(mean, 0.0), model.residual_var};
}

rvec occurrence_map(std::span<const std::optional<TrafficModel>> models, double t_h)
{
    rvec q = rvec::Zero(static_cast<Eigen::Index>(models.size()));
    for (std::size_t g = 0; g < models.size(); ++g)
        if (models[g])
            q[static_cast<Eigen::Index>(g)] = predict_traffic(*models[g], t_h).mean;
    const double total = q.sum();
    if (!(total > 0.0))
        throw RuntimeError("no demand");
    return q / total;
}

double traffic_rmse(const TrafficModel &model, std::span<const TrafficRecord> records)
{
    if (records.empty())
        return 0.0;
    double sse = 0.0;
    for (const auto &r : records)
    {
        const double e = predict_traffic(model, r.time_h).mean - r.volume;
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(records.size()));
}

} // namespace pemnet
