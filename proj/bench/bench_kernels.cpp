// SPDX-License-Identifier: Apache-2.0
// Times the OpenMP kernels against their serial reference versions.
#include <chrono>
#include <iostream>

#include <CLI11.hpp>
#include <omp.h>

#include "pemnet/config.hpp"

using namespace pemnet;

namespace
{

template <class F>
double best_of(int reps, F &&f)
{
    double best = 1e300;
    for (int i = 0; i < reps; ++i)
    {
        const auto start = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
}

void report(const std::string &name, double serial, double parallel)
{
    std::cout << name << ": serial " << serial << " s, parallel " << parallel << " s, speedup " << serial / parallel
              << '\n';
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"kernel benchmarks"};
    int reps = 3;
    int n_tx = 32;
    int inputs = 256;
    int trials = 4;
    app.add_option("--reps", reps, "repetitions per timing (best is reported)");
    app.add_option("--n-tx", n_tx, "array size");
    app.add_option("--inputs", inputs, "RSRP vectors per APS batch");
    app.add_option("--trials", trials, "beamforming trials per array size");
    CLI11_PARSE(app, argc, argv);

    std::cout << "threads: " << omp_get_max_threads() << '\n';

    RunConfig cfg = default_mcbf_config();
    cfg.scenario.n_tx = n_tx;
    const World world = make_world(cfg.scenario, cfg.traffic);
    const BeamCodebook cb = dft_codebook(n_tx, 2 * n_tx);
    const ApsSolver solver(build_beam_dictionary(cb, AngularGrid::uniform(4 * n_tx)));
    std::vector<rvec> rsrp;
    for (int i = 0; i < inputs; ++i)
        rsrp.push_back(expected_rsrp(world.profiles.links[static_cast<std::size_t>(i) % world.profiles.links.size()], cb));
    const ApsBatchOptions opt;
    report("aps batch", best_of(reps, [&] { recover_aps_batch_serial(solver, rsrp, opt); }),
           best_of(reps, [&] { recover_aps_batch(solver, rsrp, opt); }));

    cfg.bf.n_trials = trials;
    cfg.bf.n_tx_list = {8, 16};
    const SiteData site = synthesize_site(cfg);
    const Pem pem = build_site_pem(cfg, site);
    report("mcbf trials", best_of(reps, [&] { run_mcbf_experiment_serial(site.world, pem, cfg.bf, 1); }),
           best_of(reps, [&] { run_mcbf_experiment(site.world, pem, cfg.bf, 1); }));
    return 0;
}
