// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pemnet/env.hpp"
#include "pemnet/pem.hpp"

namespace pemnet
{

enum class Scheme
{
    MCBF_IDEAL,
    MCBF_CONV,
    PCBF_CONV,
    PEMNET_MCBF,
    PEMNET_PCBF,
    PEMNET_SALINR
};

inline constexpr std::array<Scheme, 6> kAllSchemes = {Scheme::MCBF_IDEAL,  Scheme::MCBF_CONV,   Scheme::PCBF_CONV,
                                                      Scheme::PEMNET_MCBF, Scheme::PEMNET_PCBF, Scheme::PEMNET_SALINR};

const char *scheme_name(Scheme s);
Scheme scheme_from_name(const std::string &name);

// Channels are indexed [cell][ue]: h_{c->k}, including cross-cell links.
struct NetworkInstance
{
    int n_cells = 0;
    int n_tx = 0;
    double power = 1.0; // per cell
    double noise = 1.0;
    std::vector<int> serving;
    std::vector<int> grid;
    std::vector<std::vector<cvec>> channels;

    int n_ues() const { return static_cast<int>(serving.size()); }
    std::vector<int> users_of(int cell) const;
    void validate() const;
};

struct CsiEstimate
{
    std::vector<std::vector<cvec>> channels; // [cell][ue]; empty vector where the scheme estimates nothing
    int n1 = 0;                              // pilot symbols spent
};

struct CsiOptions
{
    double pilot_noise_var = 0.0;
    int pem_paths = 4; // angle hypotheses taken from the PEM APS
    double t_h = 0.0;  // PEM query time
};

// Angles of the `count` largest local-maximum APS bins, strongest first. Neighbouring bins of one
// lobe describe the same path, so only peaks are taken.
std::vector<double> pem_angle_hypotheses(const rvec &aps, const AngularGrid &grid, int count);

// Least-squares gains on the hypothesized steering vectors from noisy projections a_p^H h + n.
// Gram eigenvalues below 1e-2 of the largest are dropped so near-collinear hypotheses do not amplify noise.
cvec pem_link_estimate(const cvec &h, std::span<const double> angles, double noise_var, Rng &rng);

CsiEstimate estimate_csi(const NetworkInstance &instance, Scheme scheme, const Pem *pem, const CsiOptions &options,
                         Rng &rng);

struct WmmseProblem
{
    int n_cells = 0;
    int n_tx = 0;
    std::vector<int> serving;                // serving cell of each user, in [0, n_cells)
    std::vector<std::vector<cvec>> channels; // [cell][user]
    double power = 1.0;                      // per cell
    double noise = 1.0;
};

struct WmmseOptions
{
    int max_iters = 100;
    double tol = 1e-5;
};

struct WmmseResult
{
    std::vector<cvec> beams;
    std::vector<double> sum_rate_trace; // designed-for sum rate (bit/s/Hz), initial point first
    int iterations = 0;
};

WmmseResult wmmse_beamforming(const WmmseProblem &problem, const WmmseOptions &options);

// Equal-power maximum-ratio beams, sqrt(P / K_c) h / ||h||.
std::vector<cvec> matched_filter_beams(const WmmseProblem &problem);

// SINR of every user under `beams` with the given (true) channels.
std::vector<double> compute_sinr(const std::vector<std::vector<cvec>> &channels, std::span<const int> serving,
                                 std::span<const cvec> beams, double noise);
double sum_rate(std::span<const double> sinr);

// L = E[n_victim] * sum_{g in victim} q~_g R_g, with R_g taken from the observer's CKM.
cmat leakage_covariance(const Pem &pem, int observer, int victim, double t_h, int n_tx, double expected_users);

// v_k ∝ (sum_{j != k} h_j h_j^H + L + (sigma^2 K_c / P) I)^{-1} h_k, each with power P / K_c.
std::vector<cvec> slnr_beamforming(std::span<const cvec> channels, const cmat &leakage, double power, double noise);

double effective_sum_rate(int n0, int n1, double rate);

struct EvalResult
{
    std::vector<double> sinr;
    double sum_rate = 0.0;
    double esr = 0.0;
    int n1 = 0;
};

struct SchemeContext
{
    const Pem *pem = nullptr;
    CsiOptions csi;
    WmmseOptions wmmse;
    int n0 = 500;
    // Per observer cell: sum of leakage matrices toward all other cells (PEMNET_SALINR only).
    std::vector<cmat> leakage;
};

// Leakage sums for every observer cell at the instance's array size.
std::vector<cmat> cell_leakage_sums(const Pem &pem, double t_h, int n_tx, double expected_users);

EvalResult evaluate_scheme(const NetworkInstance &instance, Scheme scheme, const SchemeContext &context, Rng &rng);

struct McbfConfig
{
    std::vector<int> n_tx_list{8, 16, 32, 64};
    int n_trials = 50;
    int n0 = 500;
    double pilot_noise_var = 0.0; // 0: noise_power / tx_power
    int pem_paths = 0;            // 0: scenario n_paths
    double eval_time_h = 18.0;
    std::vector<Scheme> schemes{kAllSchemes.begin(), kAllSchemes.end()};
    WmmseOptions wmmse;
};

struct McbfRow
{
    Scheme scheme = Scheme::MCBF_IDEAL;
    int n_tx = 0;
    int trial = 0;
    int n1 = 0;
    double sum_rate = 0.0;
    double esr = 0.0;
};

struct McbfSummaryRow
{
    Scheme scheme = Scheme::MCBF_IDEAL;
    int n_tx = 0;
    double mean_esr = 0.0;
    double stderr_esr = 0.0;
    double mean_rate = 0.0;
    double stderr_rate = 0.0;
    int n_trials = 0;
};

struct PairedDifference
{
    double mean = 0.0;
    double stderr = 0.0;
};

struct McbfResults
{
    std::vector<McbfRow> rows; // ordered by n_tx, trial, scheme
    std::vector<McbfSummaryRow> summary;

    const McbfSummaryRow &summary_of(Scheme s, int n_tx) const;
    // Per-trial paired difference a - b of ESR (or sum rate when `use_rate`).
    PairedDifference paired(Scheme a, Scheme b, int n_tx, bool use_rate = false) const;
};

// Builds one seeded trial: users placed from the PEM occurrence map, channels realized from the world.
NetworkInstance make_trial_instance(const World &world, const Pem &pem, int n_tx, double t_h, Rng &rng);

// Trials run under OpenMP; the serial variant is the reference and yields identical rows.
McbfResults run_mcbf_experiment(const World &world, const Pem &pem, const McbfConfig &config, std::uint64_t seed);
McbfResults run_mcbf_experiment_serial(const World &world, const Pem &pem, const McbfConfig &config,
                                       std::uint64_t seed);

struct Verdict
{
    std::string name;
    bool pass = false;
    std::string detail;
};

// Ordering checks over the summary: PEM-aided schemes beat their conventional counterparts by more
// than `margin_se` paired standard errors, ideal CSI tops the sum rate, and the PEM-vs-CONV multi-cell
// ESR gap does not shrink as the array grows. Checks whose schemes are absent are skipped.
std::vector<Verdict> mcbf_verdicts(const McbfResults &results, double margin_se = 2.0);

void write_mcbf_rows_csv(std::ostream &os, const McbfResults &results, const std::string &config_hash);
void write_mcbf_summary_csv(std::ostream &os, const McbfResults &results, const std::string &config_hash);

} // namespace pemnet
