// SPDX-License-Identifier: Apache-2.0
// Runs the end-to-end checks and prints one PASS/FAIL line per criterion.
// Usage: acceptance [--pemsim PATH] [--only N[,N...]] [--trials N] [--work DIR]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pemnet/config.hpp"
#include "pemnet/stf.hpp"

using namespace pemnet;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double rel_fro(const cmat &a, const cmat &b)
{
    return (a - b).norm() / b.norm();
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// |b^H a(theta)|^2 computed entry by entry, independent of the library's dictionary builder.
double beam_gain(const BeamCodebook &cb, int m, double theta)
{
    cd acc = 0.0;
    for (int n = 0; n < cb.n_tx(); ++n)
        acc += std::conj(cb.beams(n, m)) * std::polar(1.0, kPi * n * std::sin(theta));
    return std::norm(acc);
}

struct Mcbf
{
    McbfResults results;
    double seconds = 0.0;
    int trials = 0;
};

Mcbf run_mcbf(int trials)
{
    RunConfig cfg = default_mcbf_config();
    cfg.bf.n_trials = trials;
    const auto start = Clock::now();
    const SiteData site = synthesize_site(cfg);
    const Pem pem = build_site_pem(cfg, site);
    Mcbf out;
    out.results = run_mcbf_experiment(site.world, pem, cfg.bf, derive_seed(cfg.scenario.rng_seed, kStreamMcbf));
    out.seconds = seconds_since(start);
    out.trials = trials;
    return out;
}

Outcome criterion_ordering(const Mcbf &m)
{
    Outcome o{true, ""};
    for (const Verdict &v : mcbf_verdicts(m.results))
    {
        if (v.name.find("gap") != std::string::npos)
            continue;
        o.pass = o.pass && v.pass;
        if (!v.pass)
            o.detail += " [" + v.name + ":" + v.detail + "]";
    }
    const bool fast = m.seconds <= 600.0;
    o.pass = o.pass && fast;
    o.detail = std::to_string(m.trials) + " trials in " + fmt(m.seconds) + " s" + o.detail;
    return o;
}

Outcome criterion_gap(const Mcbf &m)
{
    for (const Verdict &v : mcbf_verdicts(m.results))
        if (v.name.find("gap") != std::string::npos)
            return {v.pass, "gaps" + v.detail};
    return {false, "schemes missing"};
}

Outcome criterion_lscm()
{
    RunConfig cfg = default_mcbf_config();
    cfg.scenario.n_tx = 16;
    const World world = make_world(cfg.scenario, cfg.traffic);
    const BeamCodebook cb = dft_codebook(16, 32);
    Rng rng(derive_seed(7, 3));
    std::uniform_int_distribution<int> pick_grid(0, world.grid_map.n_grids() - 1);
    std::uniform_int_distribution<int> pick_cell(0, world.config.n_cells() - 1);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i)
    {
        const PathProfile &prof = world.profiles.at(pick_cell(rng), pick_grid(rng));
        rvec oracle = rvec::Zero(cb.m_beams());
        for (int m = 0; m < cb.m_beams(); ++m)
            for (std::size_t p = 0; p < prof.n_paths(); ++p)
                oracle[m] += prof.powers[p] * beam_gain(cb, m, prof.angles[p]);
        const rvec got = synthesize_rsrp(prof, cb, 10000, 0.0, rng);
        worst = std::max(worst, (got - oracle).norm() / oracle.norm());
    }
    return {worst <= 0.05, "worst relative error " + fmt(worst) + " over 20 grids"};
}

Outcome criterion_aps_recovery()
{
    const int n_tx = 16;
    const BeamCodebook cb = dft_codebook(n_tx, 32);
    const AngularGrid grid = AngularGrid::uniform(4 * n_tx);
    const ApsSolver solver(build_beam_dictionary(cb, grid));
    Rng rng(derive_seed(7, 4));
    double worst = 0.0;
    bool monotone = true;
    for (int run = 0; run < 20; ++run)
    {
        std::vector<int> bins(static_cast<std::size_t>(grid.size()));
        std::iota(bins.begin(), bins.end(), 0);
        std::shuffle(bins.begin(), bins.end(), rng);
        PathProfile prof;
        rvec truth = rvec::Zero(grid.size());
        double total = 0.0;
        for (int p = 0; p < 4; ++p)
        {
            const double w = -std::log(uniform01(rng) + 1e-300);
            truth[bins[static_cast<std::size_t>(p)]] = w;
            total += w;
        }
        truth /= total;
        for (int n = 0; n < grid.size(); ++n)
            if (truth[n] > 0.0)
            {
                prof.angles.push_back(grid.angles[n]);
                prof.powers.push_back(truth[n]);
                prof.delays.push_back(0.0);
            }
        const rvec y = expected_rsrp(prof, cb);
        const ApsSolution sol = solver.solve(y, default_aps_lambda(solver.dictionary(), y, 1e-6), 1e-14, 50000);
        for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
            monotone = monotone && sol.objective_trace[i] <= sol.objective_trace[i - 1];
        worst = std::max(worst, rel_fro(aps_to_covariance(sol.weights, grid, n_tx), profile_covariance(prof, n_tx)));
    }
    return {worst <= 0.10 && monotone,
            "worst covariance error " + fmt(worst) + ", objective monotone: " + (monotone ? "yes" : "no")};
}

Outcome criterion_covariance_mc()
{
    const int n_tx = 16;
    const AngularGrid grid = AngularGrid::uniform(64);
    rvec aps = rvec::Zero(64);
    aps[10] = 0.5;
    aps[31] = 0.3;
    aps[50] = 0.2;
    PathProfile prof;
    for (int n = 0; n < 64; ++n)
        if (aps[n] > 0.0)
        {
            prof.angles.push_back(grid.angles[n]);
            prof.powers.push_back(aps[n]);
            prof.delays.push_back(0.0);
        }
    Rng rng(derive_seed(7, 5));
    cmat sample = cmat::Zero(n_tx, n_tx);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
    {
        const cvec h = realize_channel(prof, n_tx, rng);
        sample.selfadjointView<Eigen::Lower>().rankUpdate(h, 1.0);
    }
    sample = sample.selfadjointView<Eigen::Lower>();
    sample /= draws;
    const double err = rel_fro(sample, aps_to_covariance(aps, grid, n_tx));
    return {err <= 0.05, "relative Frobenius error " + fmt(err) + " with 1e5 draws"};
}

Outcome criterion_wmmse()
{
    Rng rng(derive_seed(7, 6));
    auto vec = [&](int n) {
        cvec v(n);
        for (int i = 0; i < n; ++i)
            v[i] = complex_normal(rng, 1.0);
        return v;
    };
    WmmseProblem single{1, 8, {0}, {{vec(8)}}, 2.0, 0.3};
    const auto r1 = wmmse_beamforming(single, {});
    const double cap = std::log2(1.0 + single.power * single.channels[0][0].squaredNorm() / single.noise);
    const double got = sum_rate(compute_sinr(single.channels, single.serving, r1.beams, single.noise));
    const double cap_err = std::abs(got - cap);

    bool monotone = true;
    double worst_power = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        WmmseProblem p;
        p.n_cells = 3;
        p.n_tx = 4;
        p.noise = 0.05;
        p.serving = {0, 0, 1, 1, 2, 2};
        p.channels.resize(3);
        for (auto &row : p.channels)
            for (int k = 0; k < 6; ++k)
                row.push_back(vec(4));
        const auto r = wmmse_beamforming(p, {});
        for (std::size_t t = 1; t < r.sum_rate_trace.size(); ++t)
            monotone = monotone && r.sum_rate_trace[t] >= r.sum_rate_trace[t - 1];
        for (int c = 0; c < 3; ++c)
        {
            double pw = 0.0;
            for (std::size_t k = 0; k < 6; ++k)
                if (p.serving[k] == c)
                    pw += r.beams[k].squaredNorm();
            worst_power = std::max(worst_power, pw - p.power);
        }
    }
    const bool pass = cap_err <= 1e-6 && monotone && worst_power <= 1e-6 * 1.0;
    return {pass, "capacity error " + fmt(cap_err) + ", monotone: " + (monotone ? "yes" : "no") +
                      ", worst power excess " + fmt(worst_power)};
}

Outcome criterion_esr()
{
    const bool a = effective_sum_rate(500, 0, 7.25) == 7.25;
    const bool b = effective_sum_rate(500, 500, 7.25) == 0.0;
    const bool c = effective_sum_rate(500, 100, 10.0) == 8.0;
    return {a && b && c, std::string("n1=0 ") + (a ? "ok" : "bad") + ", n1=n0 " + (b ? "ok" : "bad") +
                             ", n1=100 " + (c ? "ok" : "bad")};
}

Outcome criterion_rxbeam()
{
    const auto start = Clock::now();
    const RunConfig cfg = default_rxbeam_config();
    const SiteData site = synthesize_site(cfg);
    const Pem pem = build_site_pem(cfg, site);
    bool pass = true;
    std::string detail;
    for (int d : {2, 4, 8})
    {
        const RxbeamSummary s = run_rxbeam_experiment(pem, d, cfg.rxbeam).summary;
        const double margin = s.mean_capture_pem - s.mean_capture_dft;
        pass = pass && margin >= 0.0 && (d != 2 || margin >= 0.02);
        detail += "d=" + std::to_string(d) + ": " + fmt(s.mean_capture_pem) + " vs " + fmt(s.mean_capture_dft) + "; ";
    }
    const double secs = seconds_since(start);
    return {pass && secs <= 60.0, detail + fmt(secs) + " s"};
}

Outcome criterion_dtm()
{
    int wins = 0;
    bool simplex = true;
    bool argmax_ok = true;
    double worst_ratio = 0.0;
    for (int run = 0; run < 20; ++run)
    {
        ScenarioConfig s;
        s.area_width = 150.0;
        s.area_height = 150.0;
        s.grid_size = 15.0;
        s.bs_positions = {{0.0, 0.0}};
        s.n_tx = 8;
        s.rng_seed = 100 + static_cast<std::uint64_t>(run);
        Rng rng(s.rng_seed);
        TrafficGroundTruth t;
        t.gmm_means = {{20.0 + 110.0 * uniform01(rng), 20.0 + 110.0 * uniform01(rng)}};
        t.gmm_covs = {Eigen::Matrix2d::Identity() * 500.0};
        t.gmm_weights = {1.0};
        t.noise_std = 0.05;
        const World world = make_world(s, t);
        TrafficSampling ts;
        ts.horizon_h = 336.0;
        const auto data = generate_traffic_dataset(world, ts, rng);

        std::vector<std::vector<TrafficRecord>> train(static_cast<std::size_t>(world.grid_map.n_grids()));
        std::vector<std::vector<TrafficRecord>> test(train.size());
        for (const auto &r : data)
            (r.time_h < 240.0 ? train : test)[static_cast<std::size_t>(r.grid_id)].push_back(r);
        double se_model = 0.0, se_base = 0.0;
        std::size_t n = 0;
        std::vector<std::optional<TrafficModel>> models(train.size());
        for (std::size_t g = 0; g < train.size(); ++g)
        {
            if (train[g].empty())
                continue;
            models[g] = fit_traffic_model(train[g], 2, 1e-3);
            const TrafficModel base = fit_traffic_model(train[g], 0, 0.0);
            for (const auto &r : test[g])
            {
                se_model += std::pow(predict_traffic(*models[g], r.time_h).mean - r.volume, 2);
                se_base += std::pow(predict_traffic(base, r.time_h).mean - r.volume, 2);
                ++n;
            }
        }
        const double rmse_model = std::sqrt(se_model / n);
        const double rmse_base = std::sqrt(se_base / n);
        wins += rmse_model < rmse_base;
        worst_ratio = std::max(worst_ratio, rmse_model / rmse_base);

        for (double th : {3.0, 12.0, 18.0})
        {
            const rvec q = occurrence_map(models, th);
            simplex = simplex && (q.array() >= 0.0).all() && std::abs(q.sum() - 1.0) <= 1e-9;
            Eigen::Index qi = 0, di = 0;
            q.maxCoeff(&qi);
            rvec dens(world.grid_map.n_grids());
            for (int g = 0; g < world.grid_map.n_grids(); ++g)
                dens[g] = world.traffic.density(world.grid_map.centers[static_cast<std::size_t>(g)]);
            dens.maxCoeff(&di);
            const Point a = world.grid_map.centers[static_cast<std::size_t>(qi)];
            const Point b = world.grid_map.centers[static_cast<std::size_t>(di)];
            argmax_ok = argmax_ok && std::abs(a.x - b.x) <= s.grid_size + 1e-9 && std::abs(a.y - b.y) <= s.grid_size + 1e-9;
        }
    }
    return {wins == 20 && simplex && argmax_ok, std::to_string(wins) + "/20 backtests beat the intercept baseline (worst ratio " +
                                                    fmt(worst_ratio) + "), simplex: " + (simplex ? "yes" : "no") +
                                                    ", argmax within one grid: " + (argmax_ok ? "yes" : "no")};
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion_determinism(const std::string &pemsim, const fs::path &work)
{
    if (pemsim.empty() || !fs::exists(pemsim))
        return {false, "pemsim binary not found"};
    fs::create_directories(work);
    RunConfig cfg = default_mcbf_config();
    cfg.bf.n_tx_list = {8, 16};
    cfg.bf.n_trials = 2;
    const fs::path cfg_path = work / "determinism.json";
    {
        std::ofstream os(cfg_path);
        os << cfg.to_json();
    }
    struct Cmd
    {
        std::string name;
        std::string args;
    };
    const std::vector<Cmd> cmds{{"build-pem", "--config " + cfg_path.string()},
                                {"eval-mcbf", "--config " + cfg_path.string()},
                                {"eval-rxbeam", "--preset rxbeam"},
                                {"eval-gridize", "--config " + cfg_path.string()}};
    std::string detail;
    bool pass = true;
    for (const auto &c : cmds)
    {
        // Both runs write to the same directory so the configurations are identical; the first is kept aside.
        const fs::path out = work / c.name;
        std::vector<fs::path> dirs;
        for (int run = 0; run < 2; ++run)
        {
            fs::remove_all(out);
            const std::string line = pemsim + " " + c.name + " " + c.args + " --out " + out.string() + " > " +
                                     (out.string() + ".stdout") + " 2>/dev/null";
            if (std::system(line.c_str()) != 0)
            {
                pass = false;
                detail += c.name + " failed; ";
            }
            const fs::path kept = work / (c.name + "_" + std::to_string(run));
            fs::remove_all(kept);
            fs::create_directories(kept);
            fs::copy(out, kept, fs::copy_options::recursive);
            fs::copy_file(out.string() + ".stdout", kept.string() + ".stdout", fs::copy_options::overwrite_existing);
            dirs.push_back(kept);
        }
        std::size_t files = 0;
        bool same = slurp(dirs[0].string() + ".stdout") == slurp(dirs[1].string() + ".stdout");
        for (const auto &entry : fs::directory_iterator(dirs[0]))
        {
            ++files;
            same = same && slurp(entry.path()) == slurp(dirs[1] / entry.path().filename());
        }
        pass = pass && same && files > 0;
        detail += c.name + " " + std::to_string(files) + " files " + (same ? "identical" : "DIFFER") + "; ";
    }
    return {pass, detail};
}

Outcome criterion_gridize()
{
    const GridizeReport rep = run_gridize_experiment(default_mcbf_config());
    Rng rng(derive_seed(7, 11));
    bool exact = true;
    for (int i = 0; i < 200; ++i)
    {
        RsrpRecord r;
        r.rsrp = rvec(32);
        for (int m = 0; m < 32; ++m)
            r.rsrp[m] = std::pow(10.0, -6.0 * uniform01(rng));
        const rvec base = fingerprint(r, -30.0);
        for (double c : {1e-9, 0.37, 42.0, 3.3e7})
        {
            RsrpRecord s = r;
            s.rsrp *= c;
            exact = exact && fingerprint(s, -30.0) == base;
        }
    }
    return {rep.purity >= 0.9 && exact,
            "purity " + fmt(rep.purity) + ", scale invariance exact: " + (exact ? "yes" : "no")};
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"acceptance checks"};
    std::string pemsim;
    std::vector<int> only;
    int trials = 50;
    std::string work = (fs::temp_directory_path() / "pemnet_acceptance").string();
    app.add_option("--pemsim", pemsim, "path to the pemsim binary");
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--trials", trials, "Monte Carlo trials for the beamforming comparison")->check(CLI::PositiveNumber);
    app.add_option("--work", work, "scratch directory");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

    std::optional<Mcbf> mcbf;
    auto need_mcbf = [&]() -> const Mcbf & {
        if (!mcbf)
            mcbf = run_mcbf(trials);
        return *mcbf;
    };

    const std::vector<std::pair<int, std::function<Outcome()>>> checks{
        {1, [&] { return criterion_ordering(need_mcbf()); }},
        {2, [&] { return criterion_gap(need_mcbf()); }},
        {3, criterion_lscm},
        {4, criterion_aps_recovery},
        {5, criterion_covariance_mc},
        {6, criterion_wmmse},
        {7, criterion_esr},
        {8, criterion_rxbeam},
        {9, criterion_dtm},
        {10, [&] { return criterion_determinism(pemsim, work); }},
        {11, criterion_gridize},
    };

    int failures = 0;
    for (const auto &[id, run] : checks)
    {
        if (!wanted(id))
            continue;
        Outcome o;
        try
        {
            o = run();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
