// SPDX-License-Identifier: Apache-2.0
#include "pemnet/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pemnet
{

namespace
{

constexpr double kHalfPi = kPi / 2.0;
constexpr double kMaxExcessDelay = 1e-6;

bool is_multiple(double value, double step)
{
    const double ratio = value / step;
    return std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, ratio);
}

} // namespace

double ScenarioConfig::broadside(int cell) const
{
    if (!bs_broadside.empty())
        return bs_broadside.at(static_cast<std::size_t>(cell));
    const Point &bs = bs_positions.at(static_cast<std::size_t>(cell));
    const double dx = area_width / 2.0 - bs.x;
    const double dy = area_height / 2.0 - bs.y;
    if (std::hypot(dx, dy) < 1e-9)
        return 0.0;
    return std::atan2(dy, dx);
}

void ScenarioConfig::validate() const
{
    if (!(grid_size > 0.0))
        throw ConfigError("scenario.grid_size must be positive");
    if (!(area_width > 0.0) || !(area_height > 0.0))
        throw ConfigError("scenario area dimensions must be positive");
    if (!is_multiple(area_width, grid_size) || !is_multiple(area_height, grid_size))
        throw ConfigError("scenario area dimensions must be multiples of grid_size");
    if (bs_positions.empty())
        throw ConfigError("scenario.bs_positions must not be empty");
    if (!bs_broadside.empty() && bs_broadside.size() != bs_positions.size())
        throw ConfigError("scenario.bs_broadside must be empty or match bs_positions");
    if (n_tx < 1)
        throw ConfigError("scenario.n_tx must be >= 1");
    if (n_paths < 1)
        throw ConfigError("scenario.n_paths must be >= 1");
    if (n_tx < n_paths)
        throw ConfigError("scenario.n_tx must be >= n_paths");
    if (n_ues < 1)
        throw ConfigError("scenario.n_ues must be >= 1");
    if (!(tx_power > 0.0))
        throw ConfigError("scenario.tx_power must be positive");
    if (!(noise_power > 0.0))
        throw ConfigError("scenario.noise_power must be positive");
    if (!(pathloss_exponent > 0.0))
        throw ConfigError("scenario.pathloss_exponent must be positive");
}

int GridMap::grid_of(const Point &p) const
{
    const int ix = std::clamp(static_cast<int>(std::floor(p.x / grid_size)), 0, n_x - 1);
    const int iy = std::clamp(static_cast<int>(std::floor(p.y / grid_size)), 0, n_y - 1);
    return iy * n_x + ix;
}

std::vector<int> GridMap::grids_in_cell(int cell) const
{
    std::vector<int> out;
    for (int g = 0; g < n_grids(); ++g)
        if (cell_of_grid[static_cast<std::size_t>(g)] == cell)
            out.push_back(g);
    return out;
}

double PathProfile::total_power() const
{
    return std::accumulate(powers.begin(), powers.end(), 0.0);
}

void TrafficGroundTruth::validate() const
{
    if (gmm_means.empty())
        throw ConfigError("traffic GMM needs at least one component");
    if (gmm_covs.size() != gmm_means.size() || gmm_weights.size() != gmm_means.size())
        throw ConfigError("traffic GMM means, covariances and weights must have equal length");
    double sum = 0.0;
    for (double w : gmm_weights)
    {
        if (w < 0.0)
            throw ConfigError("traffic GMM weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("traffic GMM weights must sum to 1");
    for (const auto &cov : gmm_covs)
    {
        if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * std::abs(cov(0, 0)) || cov(0, 0) <= 0.0 ||
            cov.determinant() <= 0.0)
            throw ConfigError("traffic GMM covariances must be symmetric positive definite");
    }
    if (!(period_h > 0.0))
        throw ConfigError("traffic period must be positive");
    if (base < 0.0 || peak < 0.0 || noise_std < 0.0)
        throw ConfigError("traffic amplitude and noise parameters must be non-negative");
}

double TrafficGroundTruth::amplitude(double t_h) const
{
    return base + peak * std::max(0.0, std::sin(2.0 * kPi * t_h / period_h));
}

double TrafficGroundTruth::density(const Point &p) const
{
    double total = 0.0;
    for (std::size_t j = 0; j < gmm_means.size(); ++j)
    {
        const Eigen::Vector2d d(p.x - gmm_means[j].x, p.y - gmm_means[j].y);
        const Eigen::Matrix2d &cov = gmm_covs[j];
        const double quad = d.dot(cov.inverse() * d);
        total += gmm_weights[j] * std::exp(-0.5 * quad) / (2.0 * kPi * std::sqrt(cov.determinant()));
    }
    return total;
}

cvec steering_vector(double theta, int n_tx)
{
    if (!(theta > -kHalfPi && theta < kHalfPi))
        throw std::domain_error("steering angle must lie in (-pi/2, pi/2)");
    if (n_tx < 1)
        throw std::domain_error("n_tx must be >= 1");
    const double s = std::sin(theta);
    cvec a(n_tx);
    for (int m = 0; m < n_tx; ++m)
        a[m] = std::polar(1.0, kPi * m * s);
    return a;
}

GridMap build_grid_map(const ScenarioConfig &config)
{
    config.validate();
    GridMap map;
    map.grid_size = config.grid_size;
    map.n_x = static_cast<int>(std::lround(config.area_width / config.grid_size));
    map.n_y = static_cast<int>(std::lround(config.area_height / config.grid_size));
    map.centers.reserve(static_cast<std::size_t>(map.n_grids()));
    map.cell_of_grid.reserve(static_cast<std::size_t>(map.n_grids()));
    for (int iy = 0; iy < map.n_y; ++iy)
    {
        for (int ix = 0; ix < map.n_x; ++ix)
        {
            const Point c{(ix + 0.5) * config.grid_size, (iy + 0.5) * config.grid_size};
            int best = 0;
            double best_d = distance(c, config.bs_positions[0]);
            for (int b = 1; b < config.n_cells(); ++b)
            {
                const double d = distance(c, config.bs_positions[static_cast<std::size_t>(b)]);
                if (d < best_d)
                {
                    best = b;
                    best_d = d;
                }
            }
            map.centers.push_back(c);
            map.cell_of_grid.push_back(best);
        }
    }
    return map;
}

double pathloss_gain(const ScenarioConfig &config, double distance_m)
{
    const double d = std::max(distance_m, 1.0);
    const double loss_db = config.pathloss_ref_db + 10.0 * config.pathloss_exponent * std::log10(d);
    return std::pow(10.0, -loss_db / 10.0);
}

double array_bearing(const ScenarioConfig &config, int cell, const Point &target)
{
    const Point &bs = config.bs_positions.at(static_cast<std::size_t>(cell));
    const double azimuth = std::atan2(target.y - bs.y, target.x - bs.x);
    // A ULA only resolves sin(theta); back-lobe directions fold onto the front.
    const double theta = std::asin(std::sin(azimuth - config.broadside(cell)));
    const double limit = kHalfPi - 1e-9;
    return std::clamp(theta, -limit, limit);
}

ChannelProfiles generate_path_profiles(const ScenarioConfig &config, const GridMap &grid_map, Rng &rng)
{
    ChannelProfiles out;
    out.n_cells = config.n_cells();
    out.n_grids = grid_map.n_grids();
    out.links.reserve(static_cast<std::size_t>(out.n_cells) * out.n_grids);

    std::uniform_real_distribution<double> angle_dist(-kHalfPi, kHalfPi);
    std::exponential_distribution<double> dirichlet_dist(1.0);
    std::uniform_real_distribution<double> excess_dist(0.0, kMaxExcessDelay);
    const auto n_paths = static_cast<std::size_t>(config.n_paths);

    for (int c = 0; c < out.n_cells; ++c)
    {
        for (int g = 0; g < out.n_grids; ++g)
        {
            const Point &center = grid_map.centers[static_cast<std::size_t>(g)];
            const double d = std::max(distance(center, config.bs_positions[static_cast<std::size_t>(c)]), 1.0);
            PathProfile p;
            p.angles.resize(n_paths);
            p.powers.resize(n_paths);
            p.delays.resize(n_paths);
            p.angles[0] = array_bearing(config, c, center);
            for (std::size_t k = 1; k < n_paths; ++k)
            {
                double a = angle_dist(rng);
                while (a <= -kHalfPi)
                    a = angle_dist(rng);
                p.angles[k] = a;
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < n_paths; ++k)
            {
                p.powers[k] = dirichlet_dist(rng);
                sum += p.powers[k];
            }
            const double gain = pathloss_gain(config, d);
            for (std::size_t k = 0; k < n_paths; ++k)
                p.powers[k] *= gain / sum;
            p.delays[0] = d / kSpeedOfLight;
            for (std::size_t k = 1; k < n_paths; ++k)
                p.delays[k] = d / kSpeedOfLight + excess_dist(rng);
            out.links.push_back(std::move(p));
        }
    }
    return out;
}

cvec realize_channel(const PathProfile &profile, int n_tx, Rng &rng)
{
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    cvec h = cvec::Zero(n_tx);
    for (std::size_t p = 0; p < profile.n_paths(); ++p)
        h += std::polar(std::sqrt(profile.powers[p]), phase(rng)) * steering_vector(profile.angles[p], n_tx);
    return h;
}

cmat profile_covariance(const PathProfile &profile, int n_tx)
{
    cmat r = cmat::Zero(n_tx, n_tx);
    for (std::size_t p = 0; p < profile.n_paths(); ++p)
    {
        const cvec a = steering_vector(profile.angles[p], n_tx);
        r += profile.powers[p] * (a * a.adjoint());
    }
    return r;
}

double traffic_volume(const TrafficGroundTruth &truth, const Point &grid_center, double t_h, Rng &rng, bool noise)
{
    double v = truth.amplitude(t_h) * truth.density(grid_center);
    if (noise && truth.noise_std > 0.0)
        v += std::normal_distribution<double>(0.0, truth.noise_std)(rng);
    return std::max(v, 0.0);
}

std::vector<UePlacement> place_active_users(const rvec &occurrence, int n_ues, const GridMap &grid_map, Rng &rng)
{
    if (occurrence.size() != grid_map.n_grids())
        throw std::invalid_argument("occurrence length must equal the grid count");
    if ((occurrence.array() < 0.0).any() || std::abs(occurrence.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("occurrence weights must form a normalized simplex");

    std::vector<double> cdf(static_cast<std::size_t>(occurrence.size()));
    std::partial_sum(occurrence.data(), occurrence.data() + occurrence.size(), cdf.begin());
    std::vector<UePlacement> out;
    out.reserve(static_cast<std::size_t>(n_ues));
    for (int k = 0; k < n_ues; ++k)
    {
        const double u = uniform01(rng) * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const int g = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), occurrence.size() - 1));
        const Point &c = grid_map.centers[static_cast<std::size_t>(g)];
        const double half = grid_map.grid_size / 2.0;
        const Point pos{c.x - half + grid_map.grid_size * uniform01(rng), c.y - half + grid_map.grid_size * uniform01(rng)};
        out.push_back({g, pos});
    }
    return out;
}

World make_world(const ScenarioConfig &config, const TrafficGroundTruth &traffic)
{
    config.validate();
    traffic.validate();
    World w;
    w.config = config;
    w.grid_map = build_grid_map(config);
    Rng rng(derive_seed(config.rng_seed, 0x70726f66ULL));
    w.profiles = generate_path_profiles(config, w.grid_map, rng);
    w.traffic = traffic;
    return w;
}

} // namespace pemnet
