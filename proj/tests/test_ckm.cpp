// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "pemnet/ckm.hpp"
#include "pemnet/meas.hpp"

using namespace pemnet;

namespace
{

double direct_gain(const BeamCodebook &cb, int m, double theta)
{
    // |b_m^H a(theta)|^2 by explicit summation.
    cd acc(0.0, 0.0);
    for (int n = 0; n < cb.n_tx(); ++n)
        acc += std::conj(cb.beams(n, m)) * std::polar(1.0, kPi * n * std::sin(theta));
    return std::norm(acc);
}

} // namespace

TEST_CASE("angular grid")
{
    const AngularGrid g = AngularGrid::uniform(64);
    REQUIRE(g.size() == 64);
    for (int n = 0; n < 64; ++n)
    {
        CHECK(std::abs(g.angles[n]) < kPi / 2.0);
        CHECK(g.sines[n] == doctest::Approx(-1.0 + (2.0 * n + 1.0) / 64.0));
        if (n > 0)
            CHECK(g.angles[n] > g.angles[n - 1]);
    }
}

TEST_CASE("beam dictionary")
{
    const BeamCodebook cb = dft_codebook(8, 8);
    const rmat a = build_beam_dictionary(cb, AngularGrid::uniform(8));
    CHECK((a - 8.0 * rmat::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);

    const rmat single = build_beam_dictionary(dft_codebook(1, 3), AngularGrid::uniform(5));
    CHECK((single.array() - 1.0).abs().maxCoeff() < 1e-12);

    const BeamCodebook cb4 = dft_codebook(4, 4);
    const AngularGrid g16 = AngularGrid::uniform(16);
    const rmat a4 = build_beam_dictionary(cb4, g16);
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 16; ++n)
        {
            CHECK(a4(m, n) >= 0.0);
            CHECK(a4(m, n) == doctest::Approx(direct_gain(cb4, m, g16.angles[n])).epsilon(1e-10));
        }
}

TEST_CASE("APS recovery on noiseless on-grid data")
{
    const int n_tx = 16;
    const BeamCodebook cb = dft_codebook(n_tx, 2 * n_tx);
    const AngularGrid grid = AngularGrid::uniform(4 * n_tx);
    const rmat a = build_beam_dictionary(cb, grid);
    const ApsSolver solver(a);

    for (int bin : {5, 20, 33, 60})
    {
        rvec truth = rvec::Zero(grid.size());
        truth[bin] = 1.0;
        const rvec y = a * truth;
        const ApsSolution sol = solver.solve(y, default_aps_lambda(a, y, 1e-4), 1e-12, 20000);
        double near = 0.0;
        for (int k = std::max(0, bin - 1); k <= std::min(grid.size() - 1, bin + 1); ++k)
            near += sol.weights[k];
        CHECK(near / sol.weights.sum() >= 0.95);
        for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
            CHECK(sol.objective_trace[i] <= sol.objective_trace[i - 1]);
    }

    rvec four = rvec::Zero(grid.size());
    four[4] = 0.5;
    four[19] = 1.0;
    four[40] = 0.3;
    four[55] = 0.8;
    const rvec y = a * four;
    const ApsSolution sol = solver.solve(y, default_aps_lambda(a, y, 1e-6), 1e-14, 50000);
    CHECK((a * sol.weights - y).norm() / y.norm() <= 1e-3);
    CHECK((sol.weights.array() >= 0.0).all());

    const ApsSolution zero = solver.solve(rvec::Zero(y.size()), 0.0, 1e-10, 100);
    CHECK(zero.weights.isZero());
}

TEST_CASE("APS recovery homogeneity and errors")
{
    const BeamCodebook cb = dft_codebook(8, 16);
    const AngularGrid grid = AngularGrid::uniform(32);
    const rmat a = build_beam_dictionary(cb, grid);
    const ApsSolver solver(a);
    rvec truth = rvec::Zero(32);
    truth[3] = 2.0;
    truth[17] = 0.5;
    const rvec y = a * truth;
    const double lambda = default_aps_lambda(a, y);
    const ApsSolution base = solver.solve(y, lambda, 1e-10, 3000);
    const double c = 8.0;
    const ApsSolution scaled = solver.solve(c * y, c * lambda, 1e-10, 3000);
    CHECK((scaled.weights - c * base.weights).norm() <= 1e-9 * c * base.weights.norm());

    CHECK_THROWS(ApsSolver(rmat::Zero(4, 4)));
    CHECK_THROWS(solver.solve(-y, lambda, 1e-10, 10));
    CHECK_THROWS(solver.solve(y, -1.0, 1e-10, 10));
    // Power iteration sits just below the true largest eigenvalue.
    const Eigen::SelfAdjointEigenSolver<rmat> eig(a.transpose() * a);
    CHECK(solver.lipschitz() >= eig.eigenvalues().maxCoeff());
    CHECK(solver.lipschitz() <= eig.eigenvalues().maxCoeff() * (1.0 + 1e-5));
}

TEST_CASE("batch recovery matches the serial reference bit for bit")
{
    const BeamCodebook cb = dft_codebook(8, 16);
    const AngularGrid grid = AngularGrid::uniform(32);
    const ApsSolver solver(build_beam_dictionary(cb, grid));
    Rng rng(3);
    std::vector<rvec> ys;
    for (int i = 0; i < 40; ++i)
    {
        PathProfile p;
        p.angles = {uniform01(rng) * 2.0 - 1.0, uniform01(rng) * 2.0 - 1.0};
        p.powers = {uniform01(rng) + 0.1, uniform01(rng) + 0.1};
        p.delays = {0.0, 0.0};
        ys.push_back(synthesize_rsrp(p, cb, 16, 0.0, rng));
    }
    const ApsBatchOptions opts;
    const auto par = recover_aps_batch(solver, ys, opts);
    const auto ser = recover_aps_batch_serial(solver, ys, opts);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i)
    {
        CHECK(par[i].weights == ser[i].weights);
        CHECK(par[i].objective_trace == ser[i].objective_trace);
    }
}

TEST_CASE("CKM store")
{
    CkmStore store;
    ApsEstimate e;
    e.weights = rvec::Ones(4);
    e.grid_id = 2;
    store.insert(e);
    CHECK(store.size() == 1);
    CHECK(store.find(2, 0) != nullptr);
    CHECK(store.find(2, 1) == nullptr);
    CHECK_THROWS(store.insert(e));
    ApsEstimate neg = e;
    neg.grid_id = 3;
    neg.weights[1] = -1.0;
    CHECK_THROWS(store.insert(neg));
    CHECK_THROWS(store.at(9, 0));
    CHECK(provenance_from_string(to_string(Provenance::interpolated)) == Provenance::interpolated);
    CHECK_THROWS(provenance_from_string("guessed"));
}

TEST_CASE("kernel interpolation")
{
    ScenarioConfig s;
    s.area_width = 50.0;
    s.area_height = 10.0;
    s.grid_size = 10.0;
    s.bs_positions = {{25.0, -100.0}};
    const GridMap gm = build_grid_map(s);

    CkmStore store;
    auto put = [&](int g, rvec w) {
        ApsEstimate e;
        e.grid_id = g;
        e.weights = std::move(w);
        store.insert(e);
    };
    put(1, (rvec(3) << 1.0, 0.0, 2.0).finished());
    put(3, (rvec(3) << 3.0, 4.0, 0.0).finished());

    const ApsEstimate self = interpolate_aps(store, 1, 0, gm, 20.0);
    CHECK(self.weights == store.at(1, 0).weights);

    // Grid 2 sits midway between grids 1 and 3.
    const ApsEstimate mid = interpolate_aps(store, 2, 0, gm, 20.0);
    CHECK(mid.provenance == Provenance::interpolated);
    CHECK((mid.weights - (rvec(3) << 2.0, 2.0, 1.0).finished()).norm() < 1e-12);

    // Tiny bandwidth: far-away kernel weights underflow without the shift.
    const ApsEstimate sharp = interpolate_aps(store, 0, 0, gm, 0.01);
    CHECK(sharp.weights.allFinite());
    CHECK((sharp.weights - store.at(1, 0).weights).norm() < 1e-12);

    CHECK_THROWS_WITH_AS(interpolate_aps(store, 0, 1, gm, 20.0), doctest::Contains("uninterpolatable"), RuntimeError);
}

TEST_CASE("kernel interpolation beats nearest neighbour on a smooth field")
{
    ScenarioConfig s;
    s.area_width = 200.0;
    s.area_height = 200.0;
    s.grid_size = 10.0;
    s.bs_positions = {{100.0, 100.0}};
    const GridMap gm = build_grid_map(s);
    auto field = [&](int g) {
        const Point &c = gm.centers[static_cast<std::size_t>(g)];
        rvec w(4);
        w << 1.0 + std::sin(c.x / 60.0), 1.0 + std::cos(c.y / 50.0), 1.0 + 0.5 * std::sin((c.x + c.y) / 80.0), 1.0;
        return w;
    };
    double err_kernel = 0.0;
    double err_nn = 0.0;
    for (int held = 0; held < gm.n_grids(); held += 7)
    {
        CkmStore store;
        for (int g = 0; g < gm.n_grids(); ++g)
        {
            if (g == held)
                continue;
            ApsEstimate e;
            e.grid_id = g;
            e.weights = field(g);
            store.insert(e);
        }
        const rvec truth = field(held);
        err_kernel += (interpolate_aps(store, held, 0, gm, 10.0).weights - truth).squaredNorm();
        // Nearest measured grid, ties to the first found.
        double best = std::numeric_limits<double>::infinity();
        rvec nn;
        for (int g = 0; g < gm.n_grids(); ++g)
        {
            if (g == held)
                continue;
            const double d = distance(gm.centers[static_cast<std::size_t>(g)], gm.centers[static_cast<std::size_t>(held)]);
            if (d < best)
            {
                best = d;
                nn = field(g);
            }
        }
        err_nn += (nn - truth).squaredNorm();
    }
    CHECK(err_kernel <= err_nn);
}

TEST_CASE("covariance from APS")
{
    const AngularGrid grid = AngularGrid::uniform(32);
    rvec one = rvec::Zero(32);
    one[9] = 1.0;
    const cmat r1 = aps_to_covariance(one, grid, 8);
    const cvec a = steering_vector(grid.angles[9], 8);
    CHECK((r1 - a * a.adjoint()).norm() < 1e-12);
    CHECK(r1.trace().real() == doctest::Approx(8.0));
    const Eigen::SelfAdjointEigenSolver<cmat> e1(r1);
    CHECK(e1.eigenvalues()[6] < 1e-10 * 8.0);

    CHECK(aps_to_covariance(rvec::Zero(32), grid, 8).isZero());
    CHECK_THROWS(aps_to_covariance(-one, grid, 8));

    Rng rng(6);
    rvec w(32);
    for (int k = 0; k < 32; ++k)
        w[k] = uniform01(rng) < 0.3 ? uniform01(rng) : 0.0;
    const cmat r = aps_to_covariance(w, grid, 12);
    CHECK((r - r.adjoint()).norm() <= 1e-12 * r.norm());
    CHECK(r.trace().real() == doctest::Approx(12.0 * w.sum()).epsilon(1e-12));
    const Eigen::SelfAdjointEigenSolver<cmat> eig(r);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * r.trace().real());

    // Monte-Carlo oracle: random-phase superposition over the same bins.
    const int draws = 100000;
    cmat sample = cmat::Zero(12, 12);
    for (int i = 0; i < draws; ++i)
    {
        cvec h = cvec::Zero(12);
        for (int k = 0; k < 32; ++k)
            if (w[k] > 0.0)
                h += std::sqrt(w[k]) * std::polar(1.0, 2.0 * kPi * uniform01(rng)) * steering_vector(grid.angles[k], 12);
        sample += h * h.adjoint();
    }
    sample /= draws;
    CHECK((sample - r).norm() / r.norm() <= 0.05);
}
