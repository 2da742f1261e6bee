// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "pemnet/meas.hpp"
#include "pemnet/stf.hpp"

using namespace pemnet;

namespace
{

RsrpRecord record_of(std::initializer_list<double> values)
{
    RsrpRecord r;
    r.rsrp = rvec::Map(std::data(values), static_cast<Eigen::Index>(values.size()));
    return r;
}

// Records around `n` single-path directions, several noisy reports each.
std::vector<RsrpRecord> clustered_records(const std::vector<double> &angles, int per_cluster, std::vector<int> &truth,
                                          Rng &rng)
{
    const BeamCodebook cb = dft_codebook(16, 32);
    std::vector<RsrpRecord> out;
    for (std::size_t c = 0; c < angles.size(); ++c)
    {
        PathProfile p;
        p.angles = {angles[c], angles[c] + 0.4};
        p.powers = {1e-8, 2e-9};
        p.delays = {0.0, 0.0};
        for (int i = 0; i < per_cluster; ++i)
        {
            RsrpRecord r;
            r.record_id = static_cast<long>(out.size());
            r.rsrp = synthesize_rsrp(p, cb, 32, 0.0, rng) * std::exp(uniform01(rng) * 3.0);
            out.push_back(r);
            truth.push_back(static_cast<int>(c));
        }
    }
    return out;
}

} // namespace

TEST_CASE("fingerprint values")
{
    const rvec f = fingerprint(record_of({1.0, 0.1}), -30.0);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == doctest::Approx(-10.0).epsilon(1e-9));

    const rvec clamped = fingerprint(record_of({1.0, 1e-9, 0.0}), -30.0);
    CHECK(clamped[1] == -30.0);
    CHECK(clamped[2] == -30.0);

    CHECK_THROWS_WITH(fingerprint(record_of({0.0, 0.0}), -30.0), "empty measurement");
    CHECK_THROWS(fingerprint(record_of({1.0}), 0.0));
}

TEST_CASE("fingerprint scale invariance is exact")
{
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial)
    {
        RsrpRecord r;
        r.rsrp = rvec(12);
        for (int m = 0; m < 12; ++m)
            r.rsrp[m] = std::exp(-10.0 * uniform01(rng));
        const rvec base = fingerprint(r, -30.0);
        for (double c : {1e-12, 3.7, 1e9, 0.1})
        {
            RsrpRecord s = r;
            s.rsrp *= c;
            CHECK(fingerprint(s, -30.0) == base);
        }
    }
}

TEST_CASE("gridization separates single-path grids")
{
    Rng rng(7);
    std::vector<int> truth;
    const auto recs = clustered_records({-0.8, 0.7}, 15, truth, rng);
    const GridizationResult res = gridize(recs, 2, 100, rng);
    CHECK(clustering_purity(res.assignments, truth) == 1.0);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
        CHECK(res.objective_trace[i] <= res.objective_trace[i - 1]);
    CHECK(static_cast<int>(res.objective_trace.size()) <= 100);

    std::vector<int> truth3;
    const auto recs3 = clustered_records({-0.9, 0.0, 0.8}, 20, truth3, rng);
    const GridizationResult res3 = gridize(recs3, 3, 100, rng);
    CHECK(clustering_purity(res3.assignments, truth3) >= 0.9);

    // Assignment ignores per-record power scaling.
    for (std::size_t i = 0; i < recs3.size(); ++i)
    {
        RsrpRecord scaled = recs3[i];
        scaled.rsrp *= 1234.5;
        CHECK(assign_stf(scaled, res3.model) == assign_stf(recs3[i], res3.model));
    }
}

TEST_CASE("gridization edge cases")
{
    Rng rng(2);
    std::vector<int> truth;
    const auto recs = clustered_records({-0.5, 0.2, 0.9}, 3, truth, rng);
    const GridizationResult all = gridize(recs, static_cast<int>(recs.size()), 50, rng);
    CHECK(all.objective_trace.back() == doctest::Approx(0.0));

    CHECK_THROWS(gridize(recs, static_cast<int>(recs.size()) + 1, 10, rng));

    const GridizationResult one = gridize(recs, 1, 10, rng);
    CHECK(clustering_purity(one.assignments, truth) == doctest::Approx(1.0 / 3.0));

    GridizationModel model;
    model.centroids = {fingerprint(recs[0], -30.0), fingerprint(recs[4], -30.0)};
    CHECK(assign_stf(recs[0], model) == 0);
    CHECK(assign_stf(recs[4], model) == 1);
    model.centroids = {model.centroids[0], model.centroids[0]};
    CHECK(assign_stf(recs[0], model) == 0);
}

TEST_CASE("purity definition")
{
    const std::vector<int> a{0, 0, 0, 1, 1, 1};
    const std::vector<int> t{5, 5, 6, 6, 6, 6};
    CHECK(clustering_purity(a, t) == doctest::Approx(5.0 / 6.0));
    const std::vector<int> single{0, 0, 0, 0, 0, 0};
    CHECK(clustering_purity(single, t) == doctest::Approx(4.0 / 6.0));
}
