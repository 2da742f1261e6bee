// SPDX-License-Identifier: Apache-2.0
#include "pemnet/pem.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "pemnet/csv.hpp"

namespace pemnet
{

void PemBuildConfig::validate() const
{
    if (n_tx < 1)
        throw ConfigError("ckm n_tx must be >= 1");
    if (m_beams < 0 || n_angles < 0)
        throw ConfigError("ckm m_beams and n_angles must be non-negative");
    if (aps.lambda_factor < 0.0 || !(aps.tol > 0.0) || aps.max_iters < 1)
        throw ConfigError("invalid ckm solver parameters");
    if (bandwidth < 0.0)
        throw ConfigError("ckm bandwidth must be non-negative");
    if (!(interval_hours > 0.0) || n_intervals < 1)
        throw ConfigError("invalid ckm interval parameters");
    if (harmonics < 0 || ridge_weight < 0.0)
        throw ConfigError("invalid dtm parameters");
}

int Pem::interval_of(double t_h) const
{
    const double span = interval_hours * n_intervals;
    double wrapped = std::fmod(t_h, span);
    if (wrapped < 0.0)
        wrapped += span;
    return std::min(static_cast<int>(std::floor(wrapped / interval_hours)), n_intervals - 1);
}

rvec Pem::occurrence(double t_h) const
{
    return occurrence_map(std::span<const TrafficModel>(dtm), t_h);
}

bool Pem::operator==(const Pem &other) const
{
    if (!(meta == other.meta) || n_tx != other.n_tx || interval_hours != other.interval_hours ||
        n_intervals != other.n_intervals || ckm != other.ckm || dtm.size() != other.dtm.size() ||
        angular_grid.angles != other.angular_grid.angles)
        return false;
    for (std::size_t g = 0; g < dtm.size(); ++g)
    {
        const auto &a = dtm[g];
        const auto &b = other.dtm[g];
        if (a.harmonics != b.harmonics || a.residual_var != b.residual_var || a.coefficients != b.coefficients)
            return false;
    }
    return true;
}

bool PemResponse::operator==(const PemResponse &other) const
{
    return aps.weights == other.aps.weights && aps.grid_id == other.aps.grid_id &&
           aps.interval == other.aps.interval && covariance == other.covariance &&
           traffic_mean == other.traffic_mean && traffic_var == other.traffic_var &&
           occurrence_weight == other.occurrence_weight && provenance == other.provenance;
}

rvec occurrence_map(std::span<const TrafficModel> models, double t_h)
{
    rvec q(static_cast<Eigen::Index>(models.size()));
    for (std::size_t g = 0; g < models.size(); ++g)
        q[static_cast<Eigen::Index>(g)] = predict_traffic(models[g], t_h).mean;
    const double total = q.sum();
    if (!(total > 0.0))
        throw RuntimeError("no demand");
    return q / total;
}

Pem build_pem(std::span<const RsrpRecord> mr, std::span<const TrafficRecord> traffic, const GridMap &grid_map,
              int n_cells, const PemBuildConfig &config, const PemMetadata &meta, PemBuildReport *report)
{
    config.validate();
    if (mr.empty())
        throw std::invalid_argument("MR dataset is empty");
    if (n_cells < 1)
        throw std::invalid_argument("PEM needs at least one cell");

    Pem pem;
    pem.grid_map = grid_map;
    pem.n_tx = config.n_tx;
    pem.angular_grid = AngularGrid::uniform(config.resolved_n_angles());
    pem.interval_hours = config.interval_hours;
    pem.n_intervals = config.n_intervals;
    pem.meta = meta;
    pem.meta.n_grids = grid_map.n_grids();
    pem.meta.n_intervals = config.n_intervals;

    const BeamCodebook codebook = dft_codebook(config.n_tx, config.resolved_m_beams());
    const ApsSolver solver(build_beam_dictionary(codebook, pem.angular_grid));

    // Average RSRP per (cell, grid, interval); untagged records cannot be placed and are skipped.
    using Key = std::tuple<int, int, int>;
    std::map<Key, std::pair<rvec, int>> groups;
    std::size_t used = 0;
    for (const auto &r : mr)
    {
        if (r.grid_id == kUnknownGrid)
            continue;
        if (r.grid_id < 0 || r.grid_id >= grid_map.n_grids() || r.cell_id < 0 || r.cell_id >= n_cells)
            throw std::invalid_argument("MR record " + std::to_string(r.record_id) + " references an unknown grid or cell");
        if (r.rsrp.size() != codebook.m_beams())
            throw std::invalid_argument("MR record beam count does not match the codebook");
        auto [it, fresh] = groups.try_emplace(Key{r.cell_id, r.grid_id, pem.interval_of(r.time_h)}, r.rsrp, 1);
        if (!fresh)
        {
            it->second.first += r.rsrp;
            ++it->second.second;
        }
        ++used;
    }
    if (groups.empty())
        throw std::invalid_argument("MR dataset has no grid-tagged records");

    std::vector<Key> keys;
    std::vector<rvec> means;
    keys.reserve(groups.size());
    means.reserve(groups.size());
    for (const auto &[key, sum] : groups)
    {
        keys.push_back(key);
        means.push_back(sum.first / static_cast<double>(sum.second));
    }
    const auto solutions = config.parallel ? recover_aps_batch(solver, means, config.aps)
                                           : recover_aps_batch_serial(solver, means, config.aps);

    pem.ckm.resize(static_cast<std::size_t>(n_cells));
    double residual_sum = 0.0;
    double residual_max = 0.0;
    for (std::size_t i = 0; i < keys.size(); ++i)
    {
        const auto [cell, grid, interval] = keys[i];
        const double y_norm = means[i].norm();
        const double res = y_norm > 0.0 ? (solver.dictionary() * solutions[i].weights - means[i]).norm() / y_norm : 0.0;
        residual_sum += res;
        residual_max = std::max(residual_max, res);
        pem.ckm[static_cast<std::size_t>(cell)].insert({solutions[i].weights, grid, interval, Provenance::measured});
    }

    const double bandwidth = config.bandwidth > 0.0 ? config.bandwidth : 2.0 * grid_map.grid_size;
    for (auto &store : pem.ckm)
    {
        std::vector<ApsEstimate> filled;
        for (int interval = 0; interval < config.n_intervals; ++interval)
            for (int g = 0; g < grid_map.n_grids(); ++g)
                if (!store.find(g, interval))
                    filled.push_back(interpolate_aps(store, g, interval, grid_map, bandwidth));
        for (const auto &e : filled)
            store.insert(e);
    }

    std::vector<std::vector<TrafficRecord>> per_grid(static_cast<std::size_t>(grid_map.n_grids()));
    for (const auto &r : traffic)
    {
        if (r.grid_id < 0 || r.grid_id >= grid_map.n_grids())
            throw std::invalid_argument("traffic record references an unknown grid");
        per_grid[static_cast<std::size_t>(r.grid_id)].push_back(r);
    }
    pem.dtm.reserve(per_grid.size());
    double sse = 0.0;
    std::size_t n_traffic = 0;
    int n_models = 0;
    for (const auto &records : per_grid)
    {
        if (records.empty())
        {
            pem.dtm.push_back(TrafficModel::zero());
            continue;
        }
        pem.dtm.push_back(fit_traffic_model(records, config.harmonics, config.ridge_weight));
        const double rmse = traffic_rmse(pem.dtm.back(), records);
        sse += rmse * rmse * static_cast<double>(records.size());
        n_traffic += records.size();
        ++n_models;
    }

    if (report)
    {
        report->n_grids = grid_map.n_grids();
        report->n_cells = n_cells;
        report->n_intervals = config.n_intervals;
        report->n_measured = 0;
        report->n_interpolated = 0;
        for (const auto &store : pem.ckm)
        {
            report->n_measured += store.count(Provenance::measured);
            report->n_interpolated += store.count(Provenance::interpolated);
        }
        report->n_rsrp_records = used;
        report->mean_aps_residual = residual_sum / static_cast<double>(keys.size());
        report->max_aps_residual = residual_max;
        report->n_traffic_models = n_models;
        report->dtm_training_rmse = n_traffic > 0 ? std::sqrt(sse / static_cast<double>(n_traffic)) : 0.0;
    }
    return pem;
}

PemResponse query(const Pem &pem, int z, double t_h, int cell)
{
    if (z < 0 || z >= pem.n_grids())
        throw std::out_of_range("unknown grid id " + std::to_string(z));
    if (cell < 0)
        cell = pem.grid_map.cell_of_grid[static_cast<std::size_t>(z)];
    if (cell >= pem.n_cells())
        throw std::out_of_range("unknown cell id " + std::to_string(cell));

    PemResponse out;
    out.aps = pem.ckm[static_cast<std::size_t>(cell)].at(z, pem.interval_of(t_h));
    out.provenance = out.aps.provenance;
    out.covariance = aps_to_covariance(out.aps.weights, pem.angular_grid, pem.n_tx);
    const TrafficPrediction pred = predict_traffic(pem.dtm[static_cast<std::size_t>(z)], t_h);
    out.traffic_mean = pred.mean;
    out.traffic_var = pred.variance;
    out.occurrence_weight = pem.occurrence(t_h)[z];
    return out;
}

Pem rebuild(const Pem &pem, std::span<const RsrpRecord> mr, std::span<const TrafficRecord> traffic,
            const PemBuildConfig &config)
{
    return build_pem(mr, traffic, pem.grid_map, pem.n_cells(), config, pem.meta);
}

namespace
{

std::string hex64(std::uint64_t v)
{
    std::ostringstream ss;
    ss << std::hex;
    ss.width(16);
    ss.fill('0');
    ss << v;
    return ss.str();
}

std::ofstream open_out(const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw RuntimeError("cannot write " + path.string());
    return out;
}

} // namespace

void save_pem(const Pem &pem, const std::filesystem::path &dir)
{
    std::filesystem::create_directories(dir);
    const std::string hash_line = "config_hash=" + hex64(pem.meta.config_hash);

    {
        auto out = open_out(dir / "ckm.csv");
        csv::write_comment(out, hash_line);
        out << "cell_id,grid_id,interval,provenance";
        for (int n = 0; n < pem.angular_grid.size(); ++n)
            out << ",p_" << n;
        out << '\n';
        for (int c = 0; c < pem.n_cells(); ++c)
        {
            for (const auto &[key, est] : pem.ckm[static_cast<std::size_t>(c)].entries())
            {
                out << c << ',' << key.first << ',' << key.second << ',' << to_string(est.provenance);
                for (Eigen::Index n = 0; n < est.weights.size(); ++n)
                    out << ',' << csv::fmt(est.weights[n]);
                out << '\n';
            }
        }
    }
    {
        auto out = open_out(dir / "dtm.csv");
        csv::write_comment(out, hash_line);
        Eigen::Index width = 1;
        for (const auto &m : pem.dtm)
            width = std::max(width, m.coefficients.size());
        out << "grid_id,H";
        for (Eigen::Index k = 0; k < width; ++k)
            out << ",coef_" << k;
        out << ",residual_var\n";
        for (std::size_t g = 0; g < pem.dtm.size(); ++g)
        {
            const auto &m = pem.dtm[g];
            out << g << ',' << m.harmonics;
            for (Eigen::Index k = 0; k < width; ++k)
            {
                out << ',';
                if (k < m.coefficients.size())
                    out << csv::fmt(m.coefficients[k]);
            }
            out << ',' << csv::fmt(m.residual_var) << '\n';
        }
    }
    {
        auto out = open_out(dir / "meta.txt");
        out << "seed=" << pem.meta.seed << '\n'
            << "config_hash=" << hex64(pem.meta.config_hash) << '\n'
            << "n_grids=" << pem.meta.n_grids << '\n'
            << "n_intervals=" << pem.meta.n_intervals << '\n'
            << "n_cells=" << pem.n_cells() << '\n'
            << "n_tx=" << pem.n_tx << '\n'
            << "n_angles=" << pem.angular_grid.size() << '\n'
            << "interval_hours=" << csv::fmt(pem.interval_hours) << '\n';
    }
}

Pem load_pem(const std::filesystem::path &dir, const GridMap &grid_map)
{
    std::map<std::string, std::string> meta;
    {
        std::ifstream in(dir / "meta.txt");
        if (!in)
            throw RuntimeError("cannot open " + (dir / "meta.txt").string());
        std::string line;
        while (std::getline(in, line))
        {
            const auto eq = line.find('=');
            if (eq != std::string::npos)
                meta[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    auto need = [&](const std::string &key) -> const std::string & {
        const auto it = meta.find(key);
        if (it == meta.end())
            throw RuntimeError("PEM metadata lacks " + key);
        return it->second;
    };

    Pem pem;
    pem.grid_map = grid_map;
    pem.meta.seed = std::stoull(need("seed"));
    pem.meta.config_hash = std::stoull(need("config_hash"), nullptr, 16);
    pem.meta.n_grids = std::stoi(need("n_grids"));
    pem.meta.n_intervals = std::stoi(need("n_intervals"));
    pem.n_intervals = pem.meta.n_intervals;
    pem.n_tx = std::stoi(need("n_tx"));
    pem.interval_hours = csv::to_double(need("interval_hours"));
    pem.angular_grid = AngularGrid::uniform(std::stoi(need("n_angles")));
    if (pem.meta.n_grids != grid_map.n_grids())
        throw RuntimeError("PEM grid count does not match the scenario");
    pem.ckm.resize(static_cast<std::size_t>(std::stoi(need("n_cells"))));

    const csv::Table ckm = csv::read_file((dir / "ckm.csv").string());
    const std::size_t first_p = ckm.column("p_0");
    for (const auto &row : ckm.rows)
    {
        ApsEstimate e;
        const auto cell = static_cast<std::size_t>(csv::to_long(row.at(0)));
        e.grid_id = static_cast<int>(csv::to_long(row.at(1)));
        e.interval = static_cast<int>(csv::to_long(row.at(2)));
        e.provenance = provenance_from_string(row.at(3));
        e.weights.resize(pem.angular_grid.size());
        for (int n = 0; n < pem.angular_grid.size(); ++n)
            e.weights[n] = csv::to_double(row.at(first_p + static_cast<std::size_t>(n)));
        pem.ckm.at(cell).insert(e);
    }

    const csv::Table dtm = csv::read_file((dir / "dtm.csv").string());
    const std::size_t first_coef = dtm.column("coef_0");
    const std::size_t var_col = dtm.column("residual_var");
    pem.dtm.resize(static_cast<std::size_t>(grid_map.n_grids()), TrafficModel::zero());
    for (const auto &row : dtm.rows)
    {
        TrafficModel m;
        const auto g = static_cast<std::size_t>(csv::to_long(row.at(0)));
        m.harmonics = static_cast<int>(csv::to_long(row.at(1)));
        m.coefficients.resize(1 + 4 * m.harmonics);
        for (Eigen::Index k = 0; k < m.coefficients.size(); ++k)
            m.coefficients[k] = csv::to_double(row.at(first_coef + static_cast<std::size_t>(k)));
        m.residual_var = csv::to_double(row.at(var_col));
        pem.dtm.at(g) = m;
    }
    return pem;
}

} // namespace pemnet
