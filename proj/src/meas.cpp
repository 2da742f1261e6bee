// SPDX-License-Identifier: Apache-2.0
#include "pemnet/meas.hpp"

#include <cmath>
#include <ostream>

#include "pemnet/csv.hpp"

namespace pemnet
{

std::vector<RsrpRecord> MrDataset::untagged() const
{
    std::vector<RsrpRecord> out = records;
    for (auto &r : out)
        r.grid_id = kUnknownGrid;
    return out;
}

BeamCodebook dft_codebook(int n_tx, int m_beams)
{
    if (n_tx < 1 || m_beams < 1)
        throw std::invalid_argument("codebook needs n_tx >= 1 and m_beams >= 1");
    BeamCodebook cb;
    cb.beams.resize(n_tx, m_beams);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_tx));
    for (int m = 0; m < m_beams; ++m)
    {
        const double u = -1.0 + (2.0 * m + 1.0) / m_beams;
        for (int n = 0; n < n_tx; ++n)
            cb.beams(n, m) = std::polar(scale, kPi * n * u);
    }
    return cb;
}

namespace
{

// c(m, p) = b_m^H a(theta_p)
cmat beam_coupling(const PathProfile &profile, const BeamCodebook &codebook)
{
    cmat c(codebook.m_beams(), static_cast<Eigen::Index>(profile.n_paths()));
    for (std::size_t p = 0; p < profile.n_paths(); ++p)
        c.col(static_cast<Eigen::Index>(p)) =
            codebook.beams.adjoint() * steering_vector(profile.angles[p], codebook.n_tx());
    return c;
}

} // namespace

rvec expected_rsrp(const PathProfile &profile, const BeamCodebook &codebook)
{
    const cmat c = beam_coupling(profile, codebook);
    rvec out = rvec::Zero(codebook.m_beams());
    for (std::size_t p = 0; p < profile.n_paths(); ++p)
        out += profile.powers[p] * c.col(static_cast<Eigen::Index>(p)).cwiseAbs2();
    return out;
}

rvec synthesize_rsrp(const PathProfile &profile, const BeamCodebook &codebook, int n_snapshots, double meas_noise_std,
                     Rng &rng)
{
    if (n_snapshots < 1)
        throw std::invalid_argument("n_snapshots must be >= 1");
    const cmat c = beam_coupling(profile, codebook);
    const auto n_paths = static_cast<Eigen::Index>(profile.n_paths());
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);

    // b_m^H h_s = sum_p sqrt(beta_p) e^{i phi_p} c(m, p), the same draw order as realize_channel().
    rvec acc = rvec::Zero(codebook.m_beams());
    cvec gains(n_paths);
    for (int s = 0; s < n_snapshots; ++s)
    {
        for (Eigen::Index p = 0; p < n_paths; ++p)
            gains[p] = std::polar(std::sqrt(profile.powers[static_cast<std::size_t>(p)]), phase(rng));
        acc += (c * gains).cwiseAbs2();
    }
    acc /= static_cast<double>(n_snapshots);
    if (meas_noise_std > 0.0)
    {
        std::normal_distribution<double> noise(0.0, meas_noise_std);
        for (Eigen::Index m = 0; m < acc.size(); ++m)
            acc[m] = std::max(acc[m] + noise(rng), 0.0);
    }
    return acc;
}

MrDataset generate_mr_dataset(const World &world, const BeamCodebook &codebook, const MrSampling &sampling, Rng &rng)
{
    if (!(sampling.coverage_fraction > 0.0 && sampling.coverage_fraction <= 1.0))
        throw std::invalid_argument("coverage_fraction must lie in (0, 1]");
    if (sampling.records_per_grid_mean < 0.0 || sampling.n_snapshots < 1 || !(sampling.horizon_h > 0.0))
        throw std::invalid_argument("invalid MR sampling parameters");

    std::bernoulli_distribution covered(sampling.coverage_fraction);
    std::poisson_distribution<int> count_dist(sampling.records_per_grid_mean);
    std::uniform_real_distribution<double> time_dist(0.0, sampling.horizon_h);

    MrDataset out;
    long next_id = 0;
    const int n_cells = world.config.n_cells();
    for (int g = 0; g < world.grid_map.n_grids(); ++g)
    {
        if (!covered(rng))
            continue;
        const int n_reports = std::max(1, sampling.records_per_grid_mean > 0.0 ? count_dist(rng) : 1);
        for (int r = 0; r < n_reports; ++r)
        {
            const double t = time_dist(rng);
            for (int c = 0; c < n_cells; ++c)
            {
                RsrpRecord rec;
                rec.record_id = next_id++;
                rec.grid_id = g;
                rec.cell_id = c;
                rec.time_h = t;
                rec.n_snapshots = sampling.n_snapshots;
                rec.rsrp = synthesize_rsrp(world.profiles.at(c, g), codebook, sampling.n_snapshots,
                                           sampling.meas_noise_std, rng);
                out.records.push_back(std::move(rec));
            }
        }
    }
    return out;
}

std::vector<TrafficRecord> generate_traffic_dataset(const World &world, const TrafficSampling &sampling, Rng &rng)
{
    if (!(sampling.step_h > 0.0) || sampling.horizon_h < 0.0)
        throw std::invalid_argument("invalid traffic sampling parameters");
    std::vector<TrafficRecord> out;
    const auto n_steps = static_cast<long>(std::floor(sampling.horizon_h / sampling.step_h));
    for (long s = 0; s < n_steps; ++s)
    {
        const double t = static_cast<double>(s) * sampling.step_h;
        for (int g = 0; g < world.grid_map.n_grids(); ++g)
        {
            TrafficRecord rec;
            rec.grid_id = g;
            rec.time_h = t;
            rec.volume = traffic_volume(world.traffic, world.grid_map.centers[static_cast<std::size_t>(g)], t, rng);
            rec.active_count = rec.volume > 0.0 ? std::poisson_distribution<int>(rec.volume)(rng) : 0;
            out.push_back(rec);
        }
    }
    return out;
}

void write_mr_csv(std::ostream &os, std::span<const RsrpRecord> records)
{
    const Eigen::Index m = records.empty() ? 0 : records.front().rsrp.size();
    os << "record_id,cell_id,grid_id,time_h,n_snapshots";
    for (Eigen::Index i = 0; i < m; ++i)
        os << ",rsrp_" << i;
    os << '\n';
    for (const auto &r : records)
    {
        os << r.record_id << ',' << r.cell_id << ',' << r.grid_id << ',' << csv::fmt(r.time_h) << ',' << r.n_snapshots;
        for (Eigen::Index i = 0; i < r.rsrp.size(); ++i)
            os << ',' << csv::fmt(r.rsrp[i]);
        os << '\n';
    }
}

void write_traffic_csv(std::ostream &os, std::span<const TrafficRecord> records)
{
    os << "grid_id,time_h,volume,active_count\n";
    for (const auto &r : records)
        os << r.grid_id << ',' << csv::fmt(r.time_h) << ',' << csv::fmt(r.volume) << ',' << r.active_count << '\n';
}

} // namespace pemnet
