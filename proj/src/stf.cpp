// SPDX-License-Identifier: Apache-2.0
#include "pemnet/stf.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace pemnet
{

rvec fingerprint(const RsrpRecord &record, double floor_db)
{
    if (!(floor_db < 0.0))
        throw std::invalid_argument("fingerprint floor must be negative");
    const double peak = record.rsrp.size() > 0 ? record.rsrp.maxCoeff() : 0.0;
    if (!(peak > 0.0))
        throw std::invalid_argument("empty measurement");
    // Quantized to 1e-6 dB so that rounding in c*r / (c*peak) cannot leak into the fingerprint.
    constexpr double kQuantum = 1e6;
    rvec f(record.rsrp.size());
    for (Eigen::Index m = 0; m < f.size(); ++m)
    {
        const double r = record.rsrp[m];
        if (r == peak)
            f[m] = 0.0;
        else if (r > 0.0)
            f[m] = std::max(std::round(10.0 * std::log10(r / peak) * kQuantum) / kQuantum, floor_db);
        else
            f[m] = floor_db;
    }
    return f;
}

namespace
{

int nearest(const rvec &x, const std::vector<rvec> &centroids, double *dist = nullptr)
{
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.size(); ++k)
    {
        const double d = (x - centroids[k]).squaredNorm();
        if (d < best_d)
        {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    if (dist)
        *dist = best_d;
    return best;
}

} // namespace

GridizationResult gridize(std::span<const RsrpRecord> records, int n_virtual, int max_iters, Rng &rng,
                          double floor_db)
{
    const auto n = static_cast<int>(records.size());
    if (n_virtual < 1 || n < n_virtual)
        throw std::invalid_argument("gridize needs 1 <= n_virtual <= record count");

    std::vector<rvec> points;
    points.reserve(records.size());
    for (const auto &r : records)
        points.push_back(fingerprint(r, floor_db));

    GridizationResult out;
    out.model.floor_db = floor_db;
    auto &centroids = out.model.centroids;

    // Farthest-point initialization from a random first point.
    centroids.push_back(points[std::uniform_int_distribution<int>(0, n - 1)(rng)]);
    std::vector<double> nearest_d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        nearest_d[i] = (points[i] - centroids[0]).squaredNorm();
    while (static_cast<int>(centroids.size()) < n_virtual)
    {
        int far = 0;
        for (int i = 1; i < n; ++i)
            if (nearest_d[i] > nearest_d[far])
                far = i;
        centroids.push_back(points[far]);
        for (int i = 0; i < n; ++i)
            nearest_d[i] = std::min(nearest_d[i], (points[i] - centroids.back()).squaredNorm());
    }

    std::vector<int> &assign = out.assignments;
    assign.assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int iter = 0; iter < std::max(max_iters, 1); ++iter)
    {
        bool changed = false;
        double objective = 0.0;
        for (int i = 0; i < n; ++i)
        {
            const int k = nearest(points[i], centroids, &dist[i]);
            changed |= k != assign[i];
            assign[i] = k;
            objective += dist[i];
        }
        out.objective_trace.push_back(objective);
        if (!changed || iter + 1 >= max_iters)
            break;

        std::vector<rvec> sums(centroids.size(), rvec::Zero(points[0].size()));
        std::vector<int> counts(centroids.size(), 0);
        for (int i = 0; i < n; ++i)
        {
            sums[assign[i]] += points[i];
            ++counts[assign[i]];
        }
        for (std::size_t k = 0; k < centroids.size(); ++k)
        {
            if (counts[k] > 0)
            {
                centroids[k] = sums[k] / counts[k];
                continue;
            }
            // Empty cluster: move it onto the point worst served by its centroid.
            int far = 0;
            for (int i = 1; i < n; ++i)
                if (dist[i] > dist[far])
                    far = i;
            centroids[k] = points[far];
            dist[far] = 0.0;
        }
    }
    return out;
}

int assign_stf(const RsrpRecord &record, const GridizationModel &model)
{
    if (model.centroids.empty())
        throw std::invalid_argument("gridization model is not fitted");
    return nearest(fingerprint(record, model.floor_db), model.centroids);
}

double clustering_purity(std::span<const int> assignments, std::span<const int> truth)
{
    if (assignments.size() != truth.size() || assignments.empty())
        throw std::invalid_argument("purity needs equal-length, non-empty label lists");
    std::map<int, std::map<int, int>> table;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        ++table[assignments[i]][truth[i]];
    long majority = 0;
    for (const auto &[cluster, counts] : table)
    {
        int best = 0;
        for (const auto &[label, c] : counts)
            best = std::max(best, c);
        majority += best;
    }
    return static_cast<double>(majority) / static_cast<double>(assignments.size());
}

} // namespace pemnet
