// SPDX-License-Identifier: Apache-2.0
#include "pemnet/ckm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pemnet
{

AngularGrid AngularGrid::uniform(int n_angles)
{
    if (n_angles < 1)
        throw std::invalid_argument("angular grid needs at least one bin");
    AngularGrid g;
    g.sines.resize(n_angles);
    g.angles.resize(n_angles);
    for (int n = 0; n < n_angles; ++n)
    {
        g.sines[n] = -1.0 + (2.0 * n + 1.0) / n_angles;
        g.angles[n] = std::asin(g.sines[n]);
    }
    return g;
}

rmat build_beam_dictionary(const BeamCodebook &codebook, const AngularGrid &grid)
{
    rmat a(codebook.m_beams(), grid.size());
    for (int n = 0; n < grid.size(); ++n)
        a.col(n) = (codebook.beams.adjoint() * steering_vector(grid.angles[n], codebook.n_tx())).cwiseAbs2();
    return a;
}

double dictionary_lipschitz(const rmat &dictionary, int max_iters, double tol)
{
    if (dictionary.size() == 0 || dictionary.cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("zero dictionary");
    // A^T A has non-negative entries, so a positive start vector converges to the Perron vector.
    rvec v = rvec::Ones(dictionary.cols()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it)
    {
        rvec w = dictionary.transpose() * (dictionary * v);
        const double next = v.dot(w);
        const double norm = w.norm();
        if (norm == 0.0)
            break;
        v = w / norm;
        if (std::abs(next - lambda) <= tol * next)
        {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

ApsSolver::ApsSolver(rmat dictionary) : a_(std::move(dictionary))
{
    // Power iteration approaches lambda_max from below; the margin keeps the step strictly inside 1/L.
    lipschitz_ = dictionary_lipschitz(a_) * (1.0 + 1e-6);
    gram_ = a_.transpose() * a_;
}

ApsSolution ApsSolver::solve(const rvec &rsrp, double lambda, double tol, int max_iters) const
{
    if (rsrp.size() != a_.rows())
        throw std::invalid_argument("rsrp length must equal the dictionary row count");
    if ((rsrp.array() < 0.0).any())
        throw std::invalid_argument("rsrp must be non-negative");
    if (lambda < 0.0)
        throw std::invalid_argument("lambda must be non-negative");

    const rvec aty = a_.transpose() * rsrp;
    const double step = 1.0 / lipschitz_;
    auto objective = [&](const rvec &p) { return 0.5 * (a_ * p - rsrp).squaredNorm() + lambda * p.sum(); };

    ApsSolution out;
    out.weights = rvec::Zero(a_.cols());
    double current = objective(out.weights);
    out.objective_trace.push_back(current);
    for (int it = 0; it < max_iters; ++it)
    {
        const rvec grad = gram_ * out.weights - aty + rvec::Constant(a_.cols(), lambda);
        rvec next = (out.weights - step * grad).cwiseMax(0.0);
        const double value = objective(next);
        // An increase can only come from rounding once progress has stalled.
        if (value > current)
        {
            out.converged = true;
            break;
        }
        const double change = current - value;
        out.weights = std::move(next);
        out.objective_trace.push_back(value);
        out.iterations = it + 1;
        const double scale = std::max(current, std::numeric_limits<double>::min());
        current = value;
        if (change <= tol * scale)
        {
            out.converged = true;
            break;
        }
    }
    return out;
}

ApsSolution recover_aps(const rvec &rsrp, const rmat &dictionary, double lambda, double tol, int max_iters)
{
    return ApsSolver(dictionary).solve(rsrp, lambda, tol, max_iters);
}

double default_aps_lambda(const rmat &dictionary, const rvec &rsrp, double factor)
{
    return factor * (dictionary.transpose() * rsrp).cwiseAbs().maxCoeff();
}

std::vector<ApsSolution> recover_aps_batch(const ApsSolver &solver, std::span<const rvec> measurements,
                                           const ApsBatchOptions &options)
{
    std::vector<ApsSolution> out(measurements.size());
    const auto n = static_cast<long>(measurements.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i)
    {
        const rvec &y = measurements[static_cast<std::size_t>(i)];
        const double lambda = default_aps_lambda(solver.dictionary(), y, options.lambda_factor);
        out[static_cast<std::size_t>(i)] = solver.solve(y, lambda, options.tol, options.max_iters);
    }
    return out;
}

std::vector<ApsSolution> recover_aps_batch_serial(const ApsSolver &solver, std::span<const rvec> measurements,
                                                  const ApsBatchOptions &options)
{
    std::vector<ApsSolution> out;
    out.reserve(measurements.size());
    for (const rvec &y : measurements)
    {
        const double lambda = default_aps_lambda(solver.dictionary(), y, options.lambda_factor);
        out.push_back(solver.solve(y, lambda, options.tol, options.max_iters));
    }
    return out;
}

const char *to_string(Provenance p)
{
    return p == Provenance::measured ? "measured" : "interpolated";
}

Provenance provenance_from_string(const std::string &s)
{
    if (s == "measured")
        return Provenance::measured;
    if (s == "interpolated")
        return Provenance::interpolated;
    throw std::invalid_argument("unknown provenance: " + s);
}

void CkmStore::insert(const ApsEstimate &estimate)
{
    if ((estimate.weights.array() < 0.0).any() || !estimate.weights.allFinite())
        throw std::invalid_argument("APS weights must be finite and non-negative");
    const auto [it, inserted] = entries_.emplace(Key{estimate.grid_id, estimate.interval}, estimate);
    if (!inserted)
        throw std::invalid_argument("duplicate CKM entry for grid " + std::to_string(estimate.grid_id));
}

const ApsEstimate *CkmStore::find(int grid, int interval) const
{
    const auto it = entries_.find({grid, interval});
    return it == entries_.end() ? nullptr : &it->second;
}

const ApsEstimate &CkmStore::at(int grid, int interval) const
{
    const ApsEstimate *e = find(grid, interval);
    if (!e)
        throw std::out_of_range("no CKM entry for grid " + std::to_string(grid) + " interval " +
                                std::to_string(interval));
    return *e;
}

std::size_t CkmStore::count(Provenance p) const
{
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [p](const auto &kv) { return kv.second.provenance == p; }));
}

bool CkmStore::operator==(const CkmStore &other) const
{
    if (entries_.size() != other.entries_.size())
        return false;
    for (auto a = entries_.begin(), b = other.entries_.begin(); a != entries_.end(); ++a, ++b)
    {
        if (a->first != b->first || a->second.provenance != b->second.provenance ||
            a->second.weights.size() != b->second.weights.size() || a->second.weights != b->second.weights)
            return false;
    }
    return true;
}

ApsEstimate interpolate_aps(const CkmStore &store, int target_grid, int interval, const GridMap &grid_map,
                            double bandwidth)
{
    if (!(bandwidth > 0.0))
        throw std::invalid_argument("interpolation bandwidth must be positive");
    if (const ApsEstimate *self = store.find(target_grid, interval);
        self && self->provenance == Provenance::measured)
        return *self;

    const int cell = grid_map.cell_of_grid.at(static_cast<std::size_t>(target_grid));
    const Point &target = grid_map.centers[static_cast<std::size_t>(target_grid)];
    std::vector<std::pair<double, const ApsEstimate *>> neighbors;
    double d2_min = std::numeric_limits<double>::infinity();
    for (const auto &[key, est] : store.entries())
    {
        if (key.second != interval || est.provenance != Provenance::measured ||
            grid_map.cell_of_grid[static_cast<std::size_t>(key.first)] != cell)
            continue;
        const double d = distance(target, grid_map.centers[static_cast<std::size_t>(key.first)]);
        neighbors.emplace_back(d * d, &est);
        d2_min = std::min(d2_min, d * d);
    }
    if (neighbors.empty())
        throw RuntimeError("uninterpolatable: no measured grid in cell " + std::to_string(cell) + " for grid " +
                           std::to_string(target_grid));

    // Shifted by the nearest distance; the normalization cancels the shift and avoids underflow.
    ApsEstimate out;
    out.grid_id = target_grid;
    out.interval = interval;
    out.provenance = Provenance::interpolated;
    out.weights = rvec::Zero(neighbors.front().second->weights.size());
    double total = 0.0;
    for (const auto &[d2, est] : neighbors)
    {
        const double w = std::exp(-(d2 - d2_min) / (2.0 * bandwidth * bandwidth));
        out.weights += w * est->weights;
        total += w;
    }
    out.weights /= total;
    return out;
}

cmat aps_to_covariance(const rvec &weights, const AngularGrid &grid, int n_tx)
{
    if (weights.size() != grid.size())
        throw std::invalid_argument("APS length must equal the angular grid size");
    if ((weights.array() < 0.0).any())
        throw std::invalid_argument("APS weights must be non-negative");
    // R(m, n) = r(m - n) with r(l) = sum_k p_k exp(i pi l u_k).
    cvec r = cvec::Zero(n_tx);
    for (int k = 0; k < grid.size(); ++k)
    {
        if (weights[k] == 0.0)
            continue;
        for (int l = 0; l < n_tx; ++l)
            r[l] += weights[k] * std::polar(1.0, kPi * l * grid.sines[k]);
    }
    cmat out(n_tx, n_tx);
    for (int m = 0; m < n_tx; ++m)
    {
        out(m, m) = cd(r[0].real(), 0.0);
        for (int n = 0; n < m; ++n)
        {
            out(m, n) = r[m - n];
            out(n, m) = std::conj(r[m - n]);
        }
    }
    return out;
}

} // namespace pemnet
