// SPDX-License-Identifier: Apache-2.0
#include "pemnet/rxbeam.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "pemnet/csv.hpp"
#include "pemnet/meas.hpp"

namespace pemnet
{

namespace
{

std::vector<cmat> local_covariances(const Pem &pem, double t_h, int n_tx, int cell, bool unit_power)
{
    if (cell < 0 || cell >= pem.n_cells())
        throw std::out_of_range("unknown cell " + std::to_string(cell));
    const int interval = pem.interval_of(t_h);
    std::vector<cmat> out;
    out.reserve(static_cast<std::size_t>(pem.n_grids()));
    for (int g = 0; g < pem.n_grids(); ++g)
    {
        cmat r = aps_to_covariance(pem.ckm[static_cast<std::size_t>(cell)].at(g, interval).weights,
                                   pem.angular_grid, n_tx);
        if (unit_power)
        {
            const double tr = r.trace().real();
            if (tr > 0.0)
                r /= tr;
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

cmat weighted_covariance(std::span<const cmat> local, const rvec &occurrence)
{
    if (local.empty() || static_cast<Eigen::Index>(local.size()) != occurrence.size())
        throw std::invalid_argument("one occurrence weight per local covariance is required");
    cmat out = cmat::Zero(local.front().rows(), local.front().cols());
    for (std::size_t g = 0; g < local.size(); ++g)
        if (occurrence[static_cast<Eigen::Index>(g)] != 0.0)
            out += occurrence[static_cast<Eigen::Index>(g)] * local[g];
    return out;
}

cmat weighted_covariance(const Pem &pem, double t_h, int n_tx, int cell, bool unit_power)
{
    const rvec q = pem.occurrence(t_h);
    const auto local = local_covariances(pem, t_h, n_tx, cell, unit_power);
    return weighted_covariance(local, q);
}

Beamspace dominant_beamspace(const cmat &r, int d)
{
    const auto n = static_cast<int>(r.rows());
    if (d < 1 || d > n)
        throw std::invalid_argument("beamspace dimension must lie in [1, n_tx]");
    const Eigen::SelfAdjointEigenSolver<cmat> eig(r);
    Beamspace out;
    out.columns.resize(n, d);
    for (int i = 0; i < d; ++i)
    {
        // Eigenvalues come back ascending.
        cvec v = eig.eigenvectors().col(n - 1 - i);
        const double tiny = 1e-12 * v.norm();
        for (int m = 0; m < n; ++m)
        {
            if (std::abs(v[m]) > tiny)
            {
                v *= std::conj(v[m]) / std::abs(v[m]);
                v[m] = cd(v[m].real(), 0.0);
                break;
            }
        }
        out.columns.col(i) = v;
    }
    return out;
}

double capture_ratio(const Beamspace &beamspace, const cmat &r)
{
    const double total = r.trace().real();
    if (!(total > 0.0))
        throw std::invalid_argument("capture ratio needs a nonzero covariance");
    const double captured = (beamspace.columns.adjoint() * r * beamspace.columns).trace().real();
    return std::clamp(captured / total, 0.0, 1.0);
}

double capture_ratio(const Beamspace &beamspace, const rvec &aps, const AngularGrid &grid)
{
    if ((aps.array() < 0.0).any() || !(aps.sum() > 0.0))
        throw std::invalid_argument("capture ratio needs a non-negative, nonzero APS");
    return capture_ratio(beamspace, aps_to_covariance(aps, grid, static_cast<int>(beamspace.columns.rows())));
}

Beamspace best_dft_subset(std::span<const cmat> local, const rvec &occurrence, int d)
{
    if (local.empty())
        throw std::invalid_argument("no local covariances");
    const auto n_tx = static_cast<int>(local.front().rows());
    if (d < 1 || d > n_tx)
        throw std::invalid_argument("beamspace dimension must lie in [1, n_tx]");
    const BeamCodebook codebook = dft_codebook(n_tx, n_tx);
    // Orthogonal beams: subset capture is the sum of individual captures, so ranking is exact.
    std::vector<double> score(static_cast<std::size_t>(n_tx), 0.0);
    for (std::size_t g = 0; g < local.size(); ++g)
    {
        const double q = occurrence[static_cast<Eigen::Index>(g)];
        const double tr = local[g].trace().real();
        if (q == 0.0 || !(tr > 0.0))
            continue;
        for (int b = 0; b < n_tx; ++b)
        {
            const auto beam = codebook.beams.col(b);
            score[static_cast<std::size_t>(b)] += q * (beam.adjoint() * local[g] * beam)(0, 0).real() / tr;
        }
    }
    std::vector<int> order(static_cast<std::size_t>(n_tx));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)]; });
    Beamspace out;
    out.columns.resize(n_tx, d);
    for (int i = 0; i < d; ++i)
        out.columns.col(i) = codebook.beams.col(order[static_cast<std::size_t>(i)]);
    return out;
}

RxbeamResult run_rxbeam_experiment(const Pem &pem, int d, const RxbeamConfig &config)
{
    if (d < 1 || d > config.n_tx)
        throw ConfigError("rxbeam d must lie in [1, n_tx]");
    const rvec q = pem.occurrence(config.eval_time_h);
    const auto local = local_covariances(pem, config.eval_time_h, config.n_tx, config.cell, config.unit_power);

    RxbeamResult out;
    out.pem_beams = dominant_beamspace(weighted_covariance(local, q), d);
    out.dft_beams = best_dft_subset(local, q, d);
    out.summary.d = d;
    out.summary.n_tx = config.n_tx;
    for (int g = 0; g < pem.n_grids(); ++g)
    {
        const auto &r = local[static_cast<std::size_t>(g)];
        RxbeamRow row;
        row.grid = g;
        row.x = pem.grid_map.centers[static_cast<std::size_t>(g)].x;
        row.y = pem.grid_map.centers[static_cast<std::size_t>(g)].y;
        row.occurrence = q[g];
        row.capture_pem = capture_ratio(out.pem_beams, r);
        row.capture_dft = capture_ratio(out.dft_beams, r);
        out.summary.mean_capture_pem += row.occurrence * row.capture_pem;
        out.summary.mean_capture_dft += row.occurrence * row.capture_dft;
        out.rows.push_back(row);
    }
    return out;
}

ScenarioConfig rxbeam_scenario()
{
    ScenarioConfig s;
    s.area_width = 150.0;
    s.area_height = 150.0;
    s.grid_size = 10.0;
    s.bs_positions = {{0.0, 0.0}};
    s.bs_broadside = {kPi / 4.0};
    s.n_tx = 16;
    s.n_paths = 4;
    s.n_ues = 36;
    return s;
}

TrafficGroundTruth rxbeam_traffic()
{
    TrafficGroundTruth t;
    t.gmm_means = {{35.0, 115.0}, {95.0, 95.0}, {120.0, 30.0}};
    const Eigen::Matrix2d cov = Eigen::Matrix2d::Identity() * 64.0;
    t.gmm_covs = {cov, cov, cov};
    t.gmm_weights = {0.35, 0.35, 0.30};
    t.base = 500.0;
    t.peak = 2000.0;
    t.period_h = 24.0;
    t.noise_std = 0.01;
    return t;
}

void write_rxbeam_csv(std::ostream &os, const RxbeamResult &result, const std::string &config_hash)
{
    csv::write_comment(os, "config_hash=" + config_hash);
    csv::write_comment(os, "d=" + std::to_string(result.summary.d) + " n_tx=" + std::to_string(result.summary.n_tx));
    os << "grid_x_m,grid_y_m,occurrence,capture_pem,capture_dft\n";
    for (const auto &r : result.rows)
        os << csv::fmt(r.x) << ',' << csv::fmt(r.y) << ',' << csv::fmt(r.occurrence) << ',' << csv::fmt(r.capture_pem)
           << ',' << csv::fmt(r.capture_dft) << '\n';
}

} // namespace pemnet
