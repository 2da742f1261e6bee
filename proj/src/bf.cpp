// SPDX-License-Identifier: Apache-2.0
#include "pemnet/bf.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pemnet/csv.hpp"

namespace pemnet
{

const char *scheme_name(Scheme s)
{
    switch (s)
    {
    case Scheme::MCBF_IDEAL:
        return "MCBF_IDEAL";
    case Scheme::MCBF_CONV:
        return "MCBF_CONV";
    case Scheme::PCBF_CONV:
        return "PCBF_CONV";
    case Scheme::PEMNET_MCBF:
        return "PEMNET_MCBF";
    case Scheme::PEMNET_PCBF:
        return "PEMNET_PCBF";
    case Scheme::PEMNET_SALINR:
        return "PEMNET_SALINR";
    }
    return "?";
}

Scheme scheme_from_name(const std::string &name)
{
    for (Scheme s : kAllSchemes)
        if (name == scheme_name(s))
            return s;
    throw ConfigError("unknown scheme: " + name);
}

std::vector<int> NetworkInstance::users_of(int cell) const
{
    std::vector<int> out;
    for (int k = 0; k < n_ues(); ++k)
        if (serving[static_cast<std::size_t>(k)] == cell)
            out.push_back(k);
    return out;
}

void NetworkInstance::validate() const
{
    if (n_cells < 1 || n_tx < 1 || !(power > 0.0) || !(noise > 0.0))
        throw std::invalid_argument("invalid network instance parameters");
    if (channels.size() != static_cast<std::size_t>(n_cells))
        throw std::invalid_argument("instance needs one channel list per cell");
    for (const auto &per_cell : channels)
    {
        if (per_cell.size() != serving.size())
            throw std::invalid_argument("instance needs a channel for every (cell, UE) pair");
        for (const auto &h : per_cell)
            if (h.size() != n_tx)
                throw std::invalid_argument("channel length must equal n_tx");
    }
    for (int c : serving)
        if (c < 0 || c >= n_cells)
            throw std::invalid_argument("UE served by an unknown cell");
}

std::vector<double> pem_angle_hypotheses(const rvec &aps, const AngularGrid &grid, int count)
{
    if (aps.size() != grid.size())
        throw std::invalid_argument("APS length must equal the angular grid size");
    const auto n = static_cast<int>(aps.size());
    std::vector<int> peaks;
    for (int i = 0; i < n; ++i)
    {
        const double left = i > 0 ? aps[i - 1] : -1.0;
        const double right = i + 1 < n ? aps[i + 1] : -1.0;
        if (aps[i] > 0.0 && aps[i] >= left && aps[i] > right)
            peaks.push_back(i);
    }
    std::stable_sort(peaks.begin(), peaks.end(), [&](int a, int b) { return aps[a] > aps[b]; });
    const auto keep = std::min(peaks.size(), static_cast<std::size_t>(std::max(count, 0)));
    std::vector<double> out;
    for (std::size_t i = 0; i < keep; ++i)
        out.push_back(grid.angles[static_cast<std::size_t>(peaks[i])]);
    return out;
}

cvec pem_link_estimate(const cvec &h, std::span<const double> angles, double noise_var, Rng &rng)
{
    const auto n_tx = static_cast<int>(h.size());
    if (angles.empty())
        return cvec::Zero(n_tx);
    cmat a(n_tx, static_cast<Eigen::Index>(angles.size()));
    for (std::size_t p = 0; p < angles.size(); ++p)
        a.col(static_cast<Eigen::Index>(p)) = steering_vector(angles[p], n_tx);
    cvec y = a.adjoint() * h;
    if (noise_var > 0.0)
        for (Eigen::Index p = 0; p < y.size(); ++p)
            y[p] += complex_normal(rng, noise_var);
    const Eigen::SelfAdjointEigenSolver<cmat> eig(a.adjoint() * a);
    const rvec &ev = eig.eigenvalues();
    const double floor = 1e-2 * ev.maxCoeff();
    cvec z = eig.eigenvectors().adjoint() * y;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = ev[i] > floor ? z[i] / ev[i] : cd(0.0, 0.0);
    return a * (eig.eigenvectors() * z);
}

namespace
{

int scheme_pilots(Scheme scheme, int n_cells, int n_tx, int pem_paths)
{
    switch (scheme)
    {
    case Scheme::MCBF_IDEAL:
        return 0;
    case Scheme::MCBF_CONV:
        return n_cells * n_tx;
    case Scheme::PCBF_CONV:
        return n_tx;
    case Scheme::PEMNET_MCBF:
        return n_cells * pem_paths;
    case Scheme::PEMNET_PCBF:
    case Scheme::PEMNET_SALINR:
        return pem_paths;
    }
    return 0;
}

bool is_cooperative(Scheme s)
{
    return s == Scheme::MCBF_IDEAL || s == Scheme::MCBF_CONV || s == Scheme::PEMNET_MCBF;
}

bool uses_pem(Scheme s)
{
    return s == Scheme::PEMNET_MCBF || s == Scheme::PEMNET_PCBF || s == Scheme::PEMNET_SALINR;
}

} // namespace

CsiEstimate estimate_csi(const NetworkInstance &instance, Scheme scheme, const Pem *pem, const CsiOptions &options,
                         Rng &rng)
{
    instance.validate();
    CsiEstimate out;
    out.n1 = scheme_pilots(scheme, instance.n_cells, instance.n_tx, options.pem_paths);
    if (scheme == Scheme::MCBF_IDEAL)
    {
        out.channels = instance.channels;
        return out;
    }
    if (uses_pem(scheme) && !pem)
        throw std::invalid_argument(std::string(scheme_name(scheme)) + " needs a PEM");

    const bool all_links = is_cooperative(scheme);
    out.channels.assign(static_cast<std::size_t>(instance.n_cells),
                        std::vector<cvec>(static_cast<std::size_t>(instance.n_ues())));
    const int interval = pem ? pem->interval_of(options.t_h) : 0;
    for (int c = 0; c < instance.n_cells; ++c)
    {
        for (int k = 0; k < instance.n_ues(); ++k)
        {
            if (!all_links && instance.serving[static_cast<std::size_t>(k)] != c)
                continue;
            const cvec &h = instance.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
            cvec &est = out.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
            if (!uses_pem(scheme))
            {
                est = h;
                for (Eigen::Index m = 0; m < est.size(); ++m)
                    est[m] += complex_normal(rng, options.pilot_noise_var);
                continue;
            }
            const int grid = instance.grid[static_cast<std::size_t>(k)];
            if (c >= pem->n_cells() || grid < 0 || grid >= pem->n_grids())
                throw std::out_of_range("PEM lacks grid " + std::to_string(grid) + " of UE " + std::to_string(k));
            const ApsEstimate &aps = pem->ckm[static_cast<std::size_t>(c)].at(grid, interval);
            const auto angles = pem_angle_hypotheses(aps.weights, pem->angular_grid, options.pem_paths);
            est = pem_link_estimate(h, angles, options.pilot_noise_var, rng);
        }
    }
    return out;
}

std::vector<double> compute_sinr(const std::vector<std::vector<cvec>> &channels, std::span<const int> serving,
                                 std::span<const cvec> beams, double noise)
{
    const std::size_t n = serving.size();
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k)
    {
        double signal = 0.0;
        double interference = noise;
        for (std::size_t j = 0; j < n; ++j)
        {
            const cvec &h = channels[static_cast<std::size_t>(serving[j])][k];
            const double g = std::norm(h.dot(beams[j]));
            if (j == k)
                signal = g;
            else
                interference += g;
        }
        out[k] = signal / interference;
    }
    return out;
}

double sum_rate(std::span<const double> sinr)
{
    double r = 0.0;
    for (double g : sinr)
        r += std::log2(1.0 + g);
    return r;
}

std::vector<cvec> matched_filter_beams(const WmmseProblem &problem)
{
    std::vector<int> load(static_cast<std::size_t>(problem.n_cells), 0);
    for (int c : problem.serving)
        ++load[static_cast<std::size_t>(c)];
    std::vector<cvec> beams;
    beams.reserve(problem.serving.size());
    for (std::size_t k = 0; k < problem.serving.size(); ++k)
    {
        const int c = problem.serving[k];
        const cvec &h = problem.channels[static_cast<std::size_t>(c)][k];
        const double norm = h.norm();
        if (!(norm > 0.0))
            throw std::invalid_argument("WMMSE needs nonzero channels");
        beams.push_back(std::sqrt(problem.power / load[static_cast<std::size_t>(c)]) * h / norm);
    }
    return beams;
}

namespace
{

// Per-cell transmit update: v_k = (B + mu I)^{-1} r_k with the smallest mu >= 0 meeting the power budget.
void solve_cell_beams(const cmat &b, const std::vector<int> &users, const std::vector<cvec> &rhs, double power,
                      std::vector<cvec> &beams, int cell)
{
    const Eigen::SelfAdjointEigenSolver<cmat> eig(b);
    const rvec &lambda = eig.eigenvalues();
    const cmat &u = eig.eigenvectors();
    const double threshold = 1e-12 * std::max(lambda.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

    std::vector<cvec> proj;
    proj.reserve(users.size());
    double total = 0.0;
    for (int k : users)
    {
        proj.push_back(u.adjoint() * rhs[static_cast<std::size_t>(k)]);
        total += proj.back().squaredNorm();
    }
    auto power_at = [&](double mu) {
        double p = 0.0;
        for (const auto &x : proj)
            for (Eigen::Index i = 0; i < x.size(); ++i)
            {
                const double l = std::max(lambda[i], 0.0);
                if (mu == 0.0 && l <= threshold)
                    continue;
                p += std::norm(x[i]) / ((l + mu) * (l + mu));
            }
        return p;
    };

    double mu = 0.0;
    if (power_at(0.0) > power)
    {
        double lo = 0.0;
        double hi = std::sqrt(total / power) * (1.0 + 1e-12) + std::numeric_limits<double>::min();
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it)
        {
            const double mid = 0.5 * (lo + hi);
            (power_at(mid) > power ? lo : hi) = mid;
        }
        mu = hi;
        const double achieved = power_at(mu);
        if (achieved > power * (1.0 + 1e-9) || achieved < power * (1.0 - 1e-6))
        {
            std::ostringstream msg;
            msg << "WMMSE power bisection did not converge in cell " << cell << ": mu=" << mu
                << " power=" << achieved << " budget=" << power;
            throw RuntimeError(msg.str());
        }
    }
    for (std::size_t i = 0; i < users.size(); ++i)
    {
        cvec scaled = proj[i];
        for (Eigen::Index j = 0; j < scaled.size(); ++j)
        {
            const double l = std::max(lambda[j], 0.0);
            scaled[j] = (mu == 0.0 && l <= threshold) ? cd(0.0) : scaled[j] / (l + mu);
        }
        beams[static_cast<std::size_t>(users[i])] = u * scaled;
    }
}

} // namespace

WmmseResult wmmse_beamforming(const WmmseProblem &problem, const WmmseOptions &options)
{
    const auto n = problem.serving.size();
    if (problem.channels.size() != static_cast<std::size_t>(problem.n_cells))
        throw std::invalid_argument("WMMSE needs one channel list per cell");
    if (!(problem.power > 0.0) || !(problem.noise > 0.0))
        throw std::invalid_argument("WMMSE needs positive power and noise");

    WmmseResult out;
    if (n == 0)
        return out;
    std::vector<std::vector<int>> users(static_cast<std::size_t>(problem.n_cells));
    for (std::size_t k = 0; k < n; ++k)
        users[static_cast<std::size_t>(problem.serving[k])].push_back(static_cast<int>(k));

    out.beams = matched_filter_beams(problem);
    auto rate_of = [&](const std::vector<cvec> &beams) {
        return sum_rate(compute_sinr(problem.channels, problem.serving, beams, problem.noise));
    };
    double current = rate_of(out.beams);
    out.sum_rate_trace.push_back(current);

    std::vector<cd> recv(n);
    std::vector<double> weight(n);
    std::vector<cvec> rhs(n);
    std::vector<cvec> next(n);
    for (int it = 0; it < options.max_iters; ++it)
    {
        for (std::size_t k = 0; k < n; ++k)
        {
            double total = problem.noise;
            for (std::size_t j = 0; j < n; ++j)
                total += std::norm(problem.channels[static_cast<std::size_t>(problem.serving[j])][k].dot(out.beams[j]));
            const cd desired = problem.channels[static_cast<std::size_t>(problem.serving[k])][k].dot(out.beams[k]);
            recv[k] = desired / total;
            const double mse = std::max(1.0 - std::norm(desired) / total, std::numeric_limits<double>::min());
            weight[k] = 1.0 / mse;
        }
        for (int c = 0; c < problem.n_cells; ++c)
        {
            const auto &cu = users[static_cast<std::size_t>(c)];
            if (cu.empty())
                continue;
            cmat b = cmat::Zero(problem.n_tx, problem.n_tx);
            for (std::size_t i = 0; i < n; ++i)
            {
                const cvec &h = problem.channels[static_cast<std::size_t>(c)][i];
                b.selfadjointView<Eigen::Lower>().rankUpdate(h, weight[i] * std::norm(recv[i]));
            }
            b = b.selfadjointView<Eigen::Lower>();
            for (int k : cu)
                rhs[static_cast<std::size_t>(k)] =
                    weight[static_cast<std::size_t>(k)] * recv[static_cast<std::size_t>(k)] *
                    problem.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
            solve_cell_beams(b, cu, rhs, problem.power, next, c);
        }
        const double value = rate_of(next);
        // Block-coordinate steps cannot lower the rate; a drop means rounding has taken over.
        if (value < current)
            break;
        out.beams = next;
        out.sum_rate_trace.push_back(value);
        out.iterations = it + 1;
        const double change = value - current;
        current = value;
        if (change <= options.tol * std::max(std::abs(value), 1e-12))
            break;
    }
    return out;
}

cmat leakage_covariance(const Pem &pem, int observer, int victim, double t_h, int n_tx, double expected_users)
{
    if (observer < 0 || observer >= pem.n_cells() || victim < 0 || victim >= pem.n_cells())
        throw std::out_of_range("unknown cell in leakage query");
    const rvec q = pem.occurrence(t_h);
    const int interval = pem.interval_of(t_h);
    double mass = 0.0;
    for (int g = 0; g < pem.n_grids(); ++g)
        if (pem.grid_map.cell_of_grid[static_cast<std::size_t>(g)] == victim)
            mass += q[g];
    if (!(mass > 0.0))
        return cmat::Zero(n_tx, n_tx);

    // aps_to_covariance is linear in the weights, so mixing APS first gives sum q~_g R_g directly.
    rvec mixed = rvec::Zero(pem.angular_grid.size());
    const CkmStore &store = pem.ckm[static_cast<std::size_t>(observer)];
    for (int g = 0; g < pem.n_grids(); ++g)
        if (pem.grid_map.cell_of_grid[static_cast<std::size_t>(g)] == victim && q[g] > 0.0)
            mixed += (q[g] / mass) * store.at(g, interval).weights;
    return (expected_users * mass) * aps_to_covariance(mixed, pem.angular_grid, n_tx);
}

std::vector<cmat> cell_leakage_sums(const Pem &pem, double t_h, int n_tx, double expected_users)
{
    std::vector<cmat> out;
    for (int c = 0; c < pem.n_cells(); ++c)
    {
        cmat sum = cmat::Zero(n_tx, n_tx);
        for (int v = 0; v < pem.n_cells(); ++v)
            if (v != c)
                sum += leakage_covariance(pem, c, v, t_h, n_tx, expected_users);
        out.push_back(std::move(sum));
    }
    return out;
}

std::vector<cvec> slnr_beamforming(std::span<const cvec> channels, const cmat &leakage, double power, double noise)
{
    if (channels.empty())
        throw std::invalid_argument("SLNR beamforming needs at least one served UE");
    const auto n_tx = channels.front().size();
    const auto k_c = static_cast<double>(channels.size());
    cmat m = leakage;
    if (m.size() == 0)
        m = cmat::Zero(n_tx, n_tx);
    m.diagonal().array() += noise * k_c / power;
    for (const auto &h : channels)
        m.noalias() += h * h.adjoint();
    // (M - h_k h_k^H)^{-1} h_k is parallel to M^{-1} h_k (Sherman-Morrison), so one factorization serves all UEs.
    const Eigen::LDLT<cmat> ldlt(m.selfadjointView<Eigen::Lower>());
    std::vector<cvec> beams;
    beams.reserve(channels.size());
    const double per_user = std::sqrt(power / k_c);
    for (const auto &h : channels)
    {
        cvec v = ldlt.solve(h);
        const double norm = v.norm();
        beams.push_back(norm > 0.0 ? cvec(per_user * v / norm) : cvec::Zero(n_tx));
    }
    return beams;
}

double effective_sum_rate(int n0, int n1, double rate)
{
    if (n0 < 1 || n1 < 0 || n1 > n0)
        throw std::invalid_argument("ESR needs 0 <= n1 <= n0 and n0 >= 1");
    return static_cast<double>(n0 - n1) / static_cast<double>(n0) * rate;
}

EvalResult evaluate_scheme(const NetworkInstance &instance, Scheme scheme, const SchemeContext &context, Rng &rng)
{
    const CsiEstimate csi = estimate_csi(instance, scheme, context.pem, context.csi, rng);
    if (csi.n1 > context.n0)
        throw std::invalid_argument("pilot overhead exceeds the coherence block");

    std::vector<cvec> beams(static_cast<std::size_t>(instance.n_ues()));
    if (is_cooperative(scheme))
    {
        WmmseProblem p{instance.n_cells, instance.n_tx, instance.serving, csi.channels, instance.power, instance.noise};
        beams = wmmse_beamforming(p, context.wmmse).beams;
    }
    else
    {
        for (int c = 0; c < instance.n_cells; ++c)
        {
            const auto users = instance.users_of(c);
            if (users.empty())
                continue;
            std::vector<cvec> own;
            own.reserve(users.size());
            for (int k : users)
                own.push_back(csi.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
            std::vector<cvec> cell_beams;
            if (scheme == Scheme::PEMNET_SALINR)
            {
                if (context.leakage.size() != static_cast<std::size_t>(instance.n_cells))
                    throw std::invalid_argument("PEMNET_SALINR needs per-cell leakage matrices");
                cell_beams = slnr_beamforming(own, context.leakage[static_cast<std::size_t>(c)], instance.power,
                                              instance.noise);
            }
            else
            {
                WmmseProblem p{1, instance.n_tx, std::vector<int>(users.size(), 0), {own}, instance.power,
                               instance.noise};
                cell_beams = wmmse_beamforming(p, context.wmmse).beams;
            }
            for (std::size_t i = 0; i < users.size(); ++i)
                beams[static_cast<std::size_t>(users[i])] = std::move(cell_beams[i]);
        }
    }

    EvalResult out;
    out.sinr = compute_sinr(instance.channels, instance.serving, beams, instance.noise);
    out.sum_rate = sum_rate(out.sinr);
    out.n1 = csi.n1;
    out.esr = effective_sum_rate(context.n0, out.n1, out.sum_rate);
    return out;
}

const McbfSummaryRow &McbfResults::summary_of(Scheme s, int n_tx) const
{
    for (const auto &r : summary)
        if (r.scheme == s && r.n_tx == n_tx)
            return r;
    throw std::out_of_range(std::string("no summary for ") + scheme_name(s) + " at n_tx " + std::to_string(n_tx));
}

PairedDifference McbfResults::paired(Scheme a, Scheme b, int n_tx, bool use_rate) const
{
    std::map<int, double> va;
    std::map<int, double> vb;
    for (const auto &r : rows)
    {
        if (r.n_tx != n_tx)
            continue;
        const double v = use_rate ? r.sum_rate : r.esr;
        if (r.scheme == a)
            va[r.trial] = v;
        if (r.scheme == b)
            vb[r.trial] = v;
    }
    std::vector<double> d;
    for (const auto &[trial, v] : va)
        if (const auto it = vb.find(trial); it != vb.end())
            d.push_back(v - it->second);
    if (d.empty())
        throw std::out_of_range("no paired trials");
    PairedDifference out;
    out.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    if (d.size() > 1)
    {
        double ss = 0.0;
        for (double x : d)
            ss += (x - out.mean) * (x - out.mean);
        out.stderr = std::sqrt(ss / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
    }
    return out;
}

namespace
{

bool has_scheme(const McbfResults &results, Scheme s)
{
    return std::any_of(results.summary.begin(), results.summary.end(), [&](const auto &r) { return r.scheme == s; });
}

std::vector<int> result_n_tx(const McbfResults &results)
{
    std::vector<int> out;
    for (const auto &r : results.summary)
        if (std::find(out.begin(), out.end(), r.n_tx) == out.end())
            out.push_back(r.n_tx);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::vector<Verdict> mcbf_verdicts(const McbfResults &results, double margin_se)
{
    const auto n_tx_list = result_n_tx(results);
    std::vector<Verdict> out;
    auto beats = [&](Scheme a, Scheme b, bool use_rate, bool strict) {
        if (!has_scheme(results, a) || !has_scheme(results, b))
            return;
        Verdict v;
        v.name = std::string(use_rate ? "rate " : "esr ") + scheme_name(a) + (strict ? " > " : " >= ") + scheme_name(b);
        v.pass = true;
        std::ostringstream detail;
        for (int n : n_tx_list)
        {
            const PairedDifference d = results.paired(a, b, n, use_rate);
            const bool ok = strict ? d.mean > margin_se * d.stderr && d.mean > 0.0 : d.mean >= 0.0;
            v.pass = v.pass && ok;
            detail << " n_tx=" << n << ":" << d.mean << "+-" << d.stderr;
        }
        v.detail = detail.str();
        out.push_back(std::move(v));
    };
    beats(Scheme::PEMNET_MCBF, Scheme::MCBF_CONV, false, true);
    beats(Scheme::PEMNET_PCBF, Scheme::PCBF_CONV, false, true);
    beats(Scheme::PEMNET_SALINR, Scheme::PEMNET_PCBF, false, true);
    beats(Scheme::PEMNET_SALINR, Scheme::PCBF_CONV, false, true);
    for (Scheme s : kAllSchemes)
        if (s != Scheme::MCBF_IDEAL)
            beats(Scheme::MCBF_IDEAL, s, true, false);

    if (has_scheme(results, Scheme::PEMNET_MCBF) && has_scheme(results, Scheme::MCBF_CONV))
    {
        Verdict v;
        v.name = "esr gap PEMNET_MCBF - MCBF_CONV non-decreasing in n_tx";
        v.pass = true;
        std::ostringstream detail;
        double prev = -std::numeric_limits<double>::infinity();
        for (int n : n_tx_list)
        {
            const double gap = results.summary_of(Scheme::PEMNET_MCBF, n).mean_esr -
                               results.summary_of(Scheme::MCBF_CONV, n).mean_esr;
            v.pass = v.pass && gap >= prev;
            prev = gap;
            detail << " n_tx=" << n << ":" << gap;
        }
        v.detail = detail.str();
        out.push_back(std::move(v));
    }
    return out;
}

NetworkInstance make_trial_instance(const World &world, const Pem &pem, int n_tx, double t_h, Rng &rng)
{
    NetworkInstance inst;
    inst.n_cells = world.config.n_cells();
    inst.n_tx = n_tx;
    inst.power = world.config.tx_power;
    inst.noise = world.config.noise_power;
    const auto placements = place_active_users(pem.occurrence(t_h), world.config.n_ues, world.grid_map, rng);
    for (const auto &p : placements)
    {
        inst.grid.push_back(p.grid);
        inst.serving.push_back(world.grid_map.cell_of_grid[static_cast<std::size_t>(p.grid)]);
    }
    inst.channels.resize(static_cast<std::size_t>(inst.n_cells));
    for (int c = 0; c < inst.n_cells; ++c)
        for (int g : inst.grid)
            inst.channels[static_cast<std::size_t>(c)].push_back(realize_channel(world.profiles.at(c, g), n_tx, rng));
    return inst;
}

namespace
{

struct TrialTask
{
    int n_tx = 0;
    int trial = 0;
    const SchemeContext *context = nullptr;
};

std::vector<McbfRow> run_trial(const World &world, const Pem &pem, const McbfConfig &config, const TrialTask &task,
                               std::uint64_t seed)
{
    const auto key = (static_cast<std::uint64_t>(task.n_tx) << 32) | static_cast<std::uint64_t>(task.trial);
    Rng rng(derive_seed(seed, key));
    const NetworkInstance inst = make_trial_instance(world, pem, task.n_tx, config.eval_time_h, rng);
    std::vector<McbfRow> rows;
    for (Scheme s : config.schemes)
    {
        // Each scheme draws from its own stream so filtering schemes leaves the others unchanged.
        Rng scheme_rng(derive_seed(seed, key, static_cast<std::uint64_t>(s) + 1));
        try
        {
            const EvalResult r = evaluate_scheme(inst, s, *task.context, scheme_rng);
            rows.push_back({s, task.n_tx, task.trial, r.n1, r.sum_rate, r.esr});
        }
        catch (const std::exception &e)
        {
            throw RuntimeError(std::string("scheme ") + scheme_name(s) + ", n_tx " + std::to_string(task.n_tx) +
                               ", trial " + std::to_string(task.trial) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<SchemeContext> make_contexts(const World &world, const Pem &pem, const McbfConfig &config)
{
    if (config.n_trials < 1)
        throw ConfigError("bf.n_trials must be >= 1");
    if (config.n0 < 1)
        throw ConfigError("bf.n0 must be >= 1");
    if (pem.n_cells() != world.config.n_cells() || pem.n_grids() != world.grid_map.n_grids())
        throw std::invalid_argument("PEM does not match the scenario");
    const bool salinr = std::find(config.schemes.begin(), config.schemes.end(), Scheme::PEMNET_SALINR) !=
                        config.schemes.end();
    std::vector<SchemeContext> contexts;
    for (int n_tx : config.n_tx_list)
    {
        if (n_tx < 1)
            throw ConfigError("bf n_tx values must be >= 1");
        SchemeContext ctx;
        ctx.pem = &pem;
        ctx.n0 = config.n0;
        ctx.wmmse = config.wmmse;
        ctx.csi.pilot_noise_var = config.pilot_noise_var > 0.0 ? config.pilot_noise_var
                                                               : world.config.noise_power / world.config.tx_power;
        ctx.csi.pem_paths = config.pem_paths > 0 ? config.pem_paths : world.config.n_paths;
        ctx.csi.t_h = config.eval_time_h;
        if (salinr)
            ctx.leakage = cell_leakage_sums(pem, config.eval_time_h, n_tx, world.config.n_ues);
        contexts.push_back(std::move(ctx));
    }
    return contexts;
}

void summarize(McbfResults &results, const McbfConfig &config)
{
    for (int n_tx : config.n_tx_list)
    {
        for (Scheme s : config.schemes)
        {
            std::vector<double> esr;
            std::vector<double> rate;
            for (const auto &r : results.rows)
                if (r.scheme == s && r.n_tx == n_tx)
                {
                    esr.push_back(r.esr);
                    rate.push_back(r.sum_rate);
                }
            auto stats = [](const std::vector<double> &v) {
                const double n = static_cast<double>(v.size());
                const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
                double ss = 0.0;
                for (double x : v)
                    ss += (x - mean) * (x - mean);
                return std::pair{mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
            };
            McbfSummaryRow row;
            row.scheme = s;
            row.n_tx = n_tx;
            row.n_trials = static_cast<int>(esr.size());
            std::tie(row.mean_esr, row.stderr_esr) = stats(esr);
            std::tie(row.mean_rate, row.stderr_rate) = stats(rate);
            results.summary.push_back(row);
        }
    }
}

McbfResults run_mcbf(const World &world, const Pem &pem, const McbfConfig &config, std::uint64_t seed,
                     bool parallel)
{
    const auto contexts = make_contexts(world, pem, config);
    std::vector<TrialTask> tasks;
    for (std::size_t i = 0; i < config.n_tx_list.size(); ++i)
        for (int t = 0; t < config.n_trials; ++t)
            tasks.push_back({config.n_tx_list[i], t, &contexts[i]});

    std::vector<std::vector<McbfRow>> per_task(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    const auto n = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long i = 0; i < n; ++i)
    {
        try
        {
            per_task[static_cast<std::size_t>(i)] = run_trial(world, pem, config, tasks[static_cast<std::size_t>(i)], seed);
        }
        catch (...)
        {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto &e : errors)
        if (e)
            std::rethrow_exception(e);

    McbfResults out;
    for (auto &rows : per_task)
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    summarize(out, config);
    return out;
}

} // namespace

McbfResults run_mcbf_experiment(const World &world, const Pem &pem, const McbfConfig &config, std::uint64_t seed)
{
    return run_mcbf(world, pem, config, seed, true);
}

McbfResults run_mcbf_experiment_serial(const World &world, const Pem &pem, const McbfConfig &config,
                                       std::uint64_t seed)
{
    return run_mcbf(world, pem, config, seed, false);
}

void write_mcbf_rows_csv(std::ostream &os, const McbfResults &results, const std::string &config_hash)
{
    csv::write_comment(os, "config_hash=" + config_hash);
    os << "scheme,n_tx,trial,n1,sum_rate,esr\n";
    for (const auto &r : results.rows)
        os << scheme_name(r.scheme) << ',' << r.n_tx << ',' << r.trial << ',' << r.n1 << ',' << csv::fmt(r.sum_rate)
           << ',' << csv::fmt(r.esr) << '\n';
}

void write_mcbf_summary_csv(std::ostream &os, const McbfResults &results, const std::string &config_hash)
{
    csv::write_comment(os, "config_hash=" + config_hash);
    os << "scheme,n_tx,mean_esr,stderr_esr,n_trials\n";
    for (const auto &r : results.summary)
        os << scheme_name(r.scheme) << ',' << r.n_tx << ',' << csv::fmt(r.mean_esr) << ',' << csv::fmt(r.stderr_esr)
           << ',' << r.n_trials << '\n';
}

} // namespace pemnet
