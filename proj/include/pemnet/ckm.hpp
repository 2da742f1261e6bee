// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pemnet/env.hpp"
#include "pemnet/meas.hpp"

namespace pemnet
{

// Angles uniform in sin(theta): u_n = -1 + (2n+1)/N, theta_n = asin(u_n).
struct AngularGrid
{
    rvec sines;
    rvec angles;

    static AngularGrid uniform(int n_angles);
    int size() const { return static_cast<int>(angles.size()); }
};

// A(m, n) = |b_m^H a(theta_n)|^2.
rmat build_beam_dictionary(const BeamCodebook &codebook, const AngularGrid &grid);

struct ApsSolution
{
    rvec weights;
    std::vector<double> objective_trace; // objective at the start and after every accepted step
    int iterations = 0;
    bool converged = false;
};

// Projected-gradient solver for min 0.5||A p - y||^2 + lambda * sum(p), p >= 0.
// The Gram matrix and step size are computed once and reused across solves.
class ApsSolver
{
  public:
    explicit ApsSolver(rmat dictionary);

    ApsSolution solve(const rvec &rsrp, double lambda, double tol, int max_iters) const;

    const rmat &dictionary() const { return a_; }
    double lipschitz() const { return lipschitz_; }

  private:
    rmat a_;
    rmat gram_;
    double lipschitz_ = 0.0;
};

// Largest eigenvalue of A^T A by power iteration.
double dictionary_lipschitz(const rmat &dictionary, int max_iters = 1000, double tol = 1e-12);

ApsSolution recover_aps(const rvec &rsrp, const rmat &dictionary, double lambda, double tol, int max_iters);

// 1e-3 * ||A^T y||_inf
double default_aps_lambda(const rmat &dictionary, const rvec &rsrp, double factor = 1e-3);

struct ApsBatchOptions
{
    double lambda_factor = 1e-3;
    double tol = 1e-10;
    int max_iters = 3000;
};

// One recovery per measurement vector; OpenMP over inputs.
std::vector<ApsSolution> recover_aps_batch(const ApsSolver &solver, std::span<const rvec> measurements,
                                           const ApsBatchOptions &options);
// Serial reference of recover_aps_batch(); results are bit-identical.
std::vector<ApsSolution> recover_aps_batch_serial(const ApsSolver &solver, std::span<const rvec> measurements,
                                                  const ApsBatchOptions &options);

enum class Provenance
{
    measured,
    interpolated
};

const char *to_string(Provenance p);
Provenance provenance_from_string(const std::string &s);

struct ApsEstimate
{
    rvec weights;
    int grid_id = 0;
    int interval = 0;
    Provenance provenance = Provenance::measured;
};

// APS entries of one BS keyed by (grid, interval).
class CkmStore
{
  public:
    using Key = std::pair<int, int>;

    // Throws if the key is already present.
    void insert(const ApsEstimate &estimate);
    const ApsEstimate *find(int grid, int interval) const;
    const ApsEstimate &at(int grid, int interval) const;

    const std::map<Key, ApsEstimate> &entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t count(Provenance p) const;

    bool operator==(const CkmStore &other) const;

  private:
    std::map<Key, ApsEstimate> entries_;
};

// Gaussian-kernel average over measured grids of the target's cell in the same interval.
ApsEstimate interpolate_aps(const CkmStore &store, int target_grid, int interval, const GridMap &grid_map,
                            double bandwidth);

// R = sum_n p_n a(theta_n) a(theta_n)^H, assembled from its Toeplitz first column.
cmat aps_to_covariance(const rvec &weights, const AngularGrid &grid, int n_tx);

} // namespace pemnet
